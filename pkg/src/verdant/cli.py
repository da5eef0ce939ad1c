"""Command-line umbrella. Every number printed here comes from the same core
functions the HTTP service calls, so the two surfaces stay bit-identical."""

from __future__ import annotations

import csv
import json
import os
from typing import Optional

import click

from . import dendrometry, greening, ingest, pipeline, routing
from .errors import VerdantError
from .scoring import ScoringWeights


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _parse_xy(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise click.BadParameter(f"expected x,y, got {text!r}")
    return float(parts[0]), float(parts[1])


def _load_polygon(path: str) -> list[tuple[float, float]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") == "FeatureCollection":
        features = doc.get("features", [])
        if not features:
            raise click.ClickException("polygon file has no features")
        geom = features[0].get("geometry", {})
    elif doc.get("type") == "Feature":
        geom = doc.get("geometry", {})
    else:
        geom = doc
    if geom.get("type") != "Polygon":
        raise click.ClickException("polygon file must contain a Polygon geometry")
    ring = geom["coordinates"][0]
    return [(float(x), float(y)) for x, y in ring]


def _weights(path: Optional[str]) -> ScoringWeights:
    return ScoringWeights.from_json(path) if path else ScoringWeights()


def _dhc_weights(path: Optional[str]) -> routing.DhcWeights:
    if not path:
        return routing.DhcWeights()
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return routing.DhcWeights(
        alpha=doc.get("alpha", 1.0),
        beta=doc.get("beta", 0.01),
        gamma=doc.get("gamma", 500.0),
    )


@click.group()
def main():
    """Urban tree analytics: ingest open data, quantify ecosystem services,
    score streets, simulate planting, and compute eco-routes."""


@main.command("ingest")
@click.option("--census", required=True, type=click.Path(exists=True))
@click.option("--species", required=True, type=click.Path(exists=True))
@click.option("--lst", required=True, type=click.Path(exists=True))
@click.option("--nv", required=True, type=click.Path(exists=True))
@click.option("--nv-is-ndvi", is_flag=True, help="treat the NV grid as NDVI (< 0.2 becomes non-vegetated)")
@click.option("--roads", required=True, type=click.Path(exists=True))
@click.option("--timestamp", default=None, help="LST acquisition date")
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest_cmd(census, species, lst, nv, nv_is_ndvi, roads, timestamp, out_path):
    """Validate the three input streams into an immutable snapshot."""
    try:
        snapshot = ingest.build_snapshot(
            census, species, lst, nv, roads, timestamp=timestamp, nv_is_ndvi=nv_is_ndvi
        )
    except VerdantError as exc:
        raise click.ClickException(f"[{exc.code}] {exc.message}")
    ingest.save_snapshot(snapshot, out_path)
    report = snapshot.report
    click.echo(
        f"snapshot written to {out_path}: {report.accepted_rows} trees accepted, "
        f"{len(report.census_rejections)} rejected, "
        f"{len(snapshot.roads.segments)} road segments"
    )
    for rej in report.census_rejections:
        click.echo(f"  rejected row {rej['row']}: {rej['reason']}")
    for note in report.defaults_applied:
        click.echo(f"  default: {note}")


@main.command("measure")
@click.option("--mask", required=True, type=click.Path(exists=True), help="PGM mask, nonzero = subject")
@click.option("--distance", required=True, type=float, help="distance to the tree in metres")
@click.option("--image-width", type=int, default=None, help="image width in pixels (defaults to mask width)")
@click.option("--image-height", type=int, default=None)
@click.option("--c", "camera_constant", type=float, default=None, help="camera constant supplied directly")
@click.option("--exif-f35", type=float, default=None, help="35mm-equivalent focal length")
@click.option("--exif-focal", type=float, default=None, help="real focal length in mm")
@click.option("--exif-sensor-width", type=float, default=None, help="sensor width in mm")
@click.option("--calib", default=None, help="reference WIDTH_M,DISTANCE_M,SPAN_PX")
@click.option("--dbh-row", type=int, default=None, help="pixel row for the trunk measurement")
def measure_cmd(mask, distance, image_width, image_height, camera_constant,
                exif_f35, exif_focal, exif_sensor_width, calib, dbh_row):
    """Measure height, canopy diameter and DBH from a segmentation mask."""
    try:
        seg = dendrometry.SegmentationMask.from_pgm(mask)
        width = image_width if image_width is not None else seg.width
        height = image_height if image_height is not None else seg.height

        if camera_constant is not None:
            profile = dendrometry.CameraProfile(
                camera_constant=camera_constant, source=dendrometry.SOURCE_CALIBRATED
            )
        elif calib is not None:
            ref_w, ref_d, span = (float(p) for p in calib.split(","))
            profile = dendrometry.camera_constant_from_calibration(
                ref_w, ref_d, span, width
            )
        else:
            profile = dendrometry.camera_constant_from_exif(
                focal_length_mm=exif_focal,
                focal_35mm_equiv=exif_f35,
                sensor_width_mm=exif_sensor_width,
            )
        ctx = dendrometry.MeasurementContext(
            profile=profile,
            distance_m=distance,
            image_width_px=width,
            image_height_px=height,
        )
        result = dendrometry.measure_tree(seg, ctx, dbh_row_px=dbh_row)
    except VerdantError as exc:
        raise click.ClickException(f"[{exc.code}] {exc.message}")
    except ValueError as exc:
        raise click.ClickException(str(exc))
    out = result.to_dict()
    out["camera_constant"] = profile.camera_constant
    out["camera_source"] = profile.source
    out["scale_m_per_px"] = dendrometry.scale_factor(ctx)
    click.echo(canonical_json(out))


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _metrics_rows(analysis: pipeline.Analysis) -> list[list]:
    rows = []
    for m in analysis.metrics:
        r = m.to_row()
        rows.append(
            [
                r["id"],
                repr(r["agb_kg"]),
                repr(r["co2e_kg"]),
                "" if r["c_eff"] is None else repr(r["c_eff"]),
                "" if r["h_relief"] is None else repr(r["h_relief"]),
                r["archetype_label"],
            ]
        )
    return rows


def _score_rows(analysis: pipeline.Analysis) -> list[list]:
    rows = []
    for attrs in analysis.attributes:
        seq, serenity = analysis.scores[attrs.segment_id]
        rows.append(
            [
                attrs.segment_id,
                repr(attrs.canopy_area_m2),
                repr(attrs.co2_kg),
                attrs.species_count,
                repr(seq),
                repr(serenity),
            ]
        )
    return rows


METRICS_HEADER = ["id", "agb_kg", "co2e_kg", "c_eff", "h_relief", "archetype_label"]
SCORES_HEADER = ["segment_id", "canopy_area_m2", "co2_kg", "species_count", "seq", "serenity"]


@main.command("analyze")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--buffer", "buffer_m", type=float, default=250.0, show_default=True)
@click.option("--min-sample", type=int, default=10, show_default=True)
def analyze_cmd(snapshot_path, out_path, buffer_m, min_sample):
    """Per-tree metrics: biomass, CO2e, cooling, archetype."""
    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot, buffer_m=buffer_m, min_sample=min_sample)
    _write_csv(out_path, METRICS_HEADER, _metrics_rows(analysis))
    undefined = sum(1 for m in analysis.metrics if m.cooling is None)
    click.echo(f"{len(analysis.metrics)} trees analyzed -> {out_path}")
    if undefined:
        click.echo(f"  {undefined} trees without cooling metrics (see empty cells)")


@main.command("score")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--weights", "weights_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def score_cmd(snapshot_path, weights_path, out_path):
    """Per-segment attributes and SEQ / Serenity scores."""
    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot, weights=_weights(weights_path))
    _write_csv(out_path, SCORES_HEADER, _score_rows(analysis))
    click.echo(f"{len(analysis.attributes)} segments scored -> {out_path}")


@main.command("simulate")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--polygon", "polygon_path", required=True, type=click.Path(exists=True))
@click.option("--archetype", required=True)
@click.option("--spacing", type=float, default=None, help="lattice spacing in metres (default: archetype canopy diameter)")
@click.option("--delta-out", type=click.Path(), default=None, help="write the cooling grid as ESRI ASCII")
def simulate_cmd(snapshot_path, polygon_path, archetype, spacing, delta_out):
    """Hex-pack an archetype inside a polygon and predict the LST depression."""
    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot)
    try:
        scenario = pipeline.scenario_for_archetype(
            analysis, archetype, _load_polygon(polygon_path)
        )
        outcome = greening.simulate_planting(scenario, snapshot.scene, spacing_m=spacing)
    except VerdantError as exc:
        raise click.ClickException(f"[{exc.code}] {exc.message}")
    if delta_out:
        ingest.write_ascii_grid(
            delta_out,
            outcome.delta_grid,
            snapshot.scene.origin_x,
            snapshot.scene.origin_y,
            snapshot.scene.cell_size,
        )
    click.echo(canonical_json(outcome.to_dict()))


@main.command("route")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--from", "from_xy", required=True, help="origin x,y in metres")
@click.option("--to", "to_xy", required=True, help="destination x,y in metres")
@click.option("--mode", type=click.Choice(["car", "foot"]), default="car", show_default=True)
@click.option("--weights", "dhc_path", type=click.Path(exists=True), default=None,
              help="DHC weights JSON {alpha, beta, gamma}")
@click.option("--score-weights", type=click.Path(exists=True), default=None)
def route_cmd(snapshot_path, from_xy, to_xy, mode, dhc_path, score_weights):
    """Eco vs conventional route between two points."""
    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot, weights=_weights(score_weights))
    graph = pipeline.build_scored_graph(snapshot, analysis)
    origin, dest = _parse_xy(from_xy), _parse_xy(to_xy)
    try:
        result = routing.route_pair(
            graph, origin, dest, mode, weights=_dhc_weights(dhc_path)
        )
    except VerdantError as exc:
        raise click.ClickException(f"[{exc.code}] {exc.message}")
    click.echo(canonical_json(result.to_dict()))


@main.command("loop")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--start", required=True, help="start x,y in metres")
@click.option("--minutes", required=True, type=float)
@click.option("--speed", "walking_speed", type=float, default=5.0, show_default=True)
@click.option("--score-weights", type=click.Path(exists=True), default=None)
def loop_cmd(snapshot_path, start, minutes, walking_speed, score_weights):
    """Closed serenity loop matching a walking-time budget."""
    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot, weights=_weights(score_weights))
    graph = pipeline.build_scored_graph(snapshot, analysis)
    try:
        result = routing.serenity_loop(
            graph, _parse_xy(start), minutes, walking_speed_kmh=walking_speed
        )
    except VerdantError as exc:
        raise click.ClickException(f"[{exc.code}] {exc.message}")
    click.echo(canonical_json(result.to_dict()))


@main.command("report")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--weights", "weights_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", required=True, type=click.Path())
def report_cmd(snapshot_path, weights_path, out_dir):
    """Delimited outputs plus rendered figures in one directory."""
    from . import figures

    snapshot = ingest.load_snapshot(snapshot_path)
    analysis = pipeline.analyze(snapshot, weights=_weights(weights_path))
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_HEADER, _metrics_rows(analysis))
    _write_csv(os.path.join(out_dir, "scores.csv"), SCORES_HEADER, _score_rows(analysis))
    figures.plot_attribute_distributions(analysis, os.path.join(out_dir, "attribute_distributions.png"))
    figures.plot_emissions_curve(os.path.join(out_dir, "emissions_curve.png"))
    figures.plot_archetype_performance(analysis, os.path.join(out_dir, "archetype_performance.png"))
    figures.plot_score_map(snapshot, analysis, os.path.join(out_dir, "score_map.png"))
    click.echo(f"report written to {out_dir}")


@main.command("serve")
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=None, help="default: env VERDANT_PORT or 8080")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--pending-store", type=click.Path(), default=None,
              help="JSON file for pending citizen measurements")
def serve_cmd(snapshot_path, port, host, pending_store):
    """Run the HTTP JSON API over a snapshot."""
    import uvicorn

    from .service import create_app

    snapshot = ingest.load_snapshot(snapshot_path)
    app = create_app(snapshot, pending_store_path=pending_store)
    resolved = port if port is not None else int(os.environ.get("VERDANT_PORT", "8080"))
    uvicorn.run(app, host=host, port=resolved)


if __name__ == "__main__":
    main()
