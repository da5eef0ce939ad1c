"""Loading and validation of the three input streams (tree census, rasters,
road network) into an immutable analysis snapshot.

Rows that violate invariants are rejected and reported, never repaired; the
snapshot is a plain JSON document so that two loads of the same files compare
equal field by field.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridMismatchError, IngestError, MissingSpeciesError
from .geometry import polyline_length

CENSUS_HEADER = ["id", "x", "y", "species", "height_m", "girth_cm", "canopy_diameter_m"]
DEFAULT_SPEED_KMH = 40.0
LST_VALID_RANGE = (-20.0, 80.0)
WOOD_DENSITY_RANGE = (0.1, 1.5)
NDVI_NV_THRESHOLD = 0.2


@dataclass(frozen=True)
class TreeRecord:
    """One censused or citizen-measured tree."""

    id: str
    x: float
    y: float
    species: str
    height_m: float
    girth_cm: float
    canopy_diameter_m: float
    condition: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "x": self.x,
            "y": self.y,
            "species": self.species,
            "height_m": self.height_m,
            "girth_cm": self.girth_cm,
            "canopy_diameter_m": self.canopy_diameter_m,
            "condition": self.condition,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeRecord":
        return cls(**d)


@dataclass(frozen=True)
class SpeciesInfo:
    species: str
    wood_density: float  # g/cm^3

    def to_dict(self) -> dict:
        return {"species": self.species, "wood_density": self.wood_density}


@dataclass
class RasterScene:
    """Georeferenced LST grid plus the non-vegetated mask.

    `lst` is stored north row first with NaN for NODATA; `origin` is the
    lower-left corner of the grid in metres.
    """

    origin_x: float
    origin_y: float
    cell_size: float
    rows: int
    cols: int
    lst: np.ndarray  # float64 (rows, cols), NaN = missing
    nv_mask: np.ndarray  # bool (rows, cols), True = non-vegetated
    timestamp: Optional[str] = None

    def cell_index(self, x: float, y: float) -> Optional[tuple[int, int]]:
        """Array (row, col) of the cell containing the point, or None when the
        point falls outside the grid extent."""
        col = math.floor((x - self.origin_x) / self.cell_size)
        row_from_bottom = math.floor((y - self.origin_y) / self.cell_size)
        if col < 0 or col >= self.cols or row_from_bottom < 0 or row_from_bottom >= self.rows:
            return None
        return self.rows - 1 - row_from_bottom, col

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        x = self.origin_x + (col + 0.5) * self.cell_size
        y = self.origin_y + (self.rows - 1 - row + 0.5) * self.cell_size
        return x, y

    def to_dict(self) -> dict:
        lst_rows = [
            [None if math.isnan(v) else v for v in row] for row in self.lst.tolist()
        ]
        return {
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "cell_size": self.cell_size,
            "rows": self.rows,
            "cols": self.cols,
            "lst": lst_rows,
            "nv_mask": [[int(v) for v in row] for row in self.nv_mask.tolist()],
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RasterScene":
        lst = np.array(
            [[np.nan if v is None else float(v) for v in row] for row in d["lst"]],
            dtype=np.float64,
        )
        nv = np.array(d["nv_mask"], dtype=bool)
        return cls(
            origin_x=d["origin_x"],
            origin_y=d["origin_y"],
            cell_size=d["cell_size"],
            rows=d["rows"],
            cols=d["cols"],
            lst=lst,
            nv_mask=nv,
            timestamp=d.get("timestamp"),
        )


@dataclass(frozen=True)
class RoadSegment:
    id: str
    coords: tuple[tuple[float, float], ...]
    highway_class: str
    foot_allowed: bool
    car_allowed: bool
    speed_limit_kmh: float
    traffic_speed_kmh: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "coords": [list(c) for c in self.coords],
            "highway_class": self.highway_class,
            "foot_allowed": self.foot_allowed,
            "car_allowed": self.car_allowed,
            "speed_limit_kmh": self.speed_limit_kmh,
            "traffic_speed_kmh": self.traffic_speed_kmh,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoadSegment":
        return cls(
            id=d["id"],
            coords=tuple(tuple(c) for c in d["coords"]),
            highway_class=d["highway_class"],
            foot_allowed=d["foot_allowed"],
            car_allowed=d["car_allowed"],
            speed_limit_kmh=d["speed_limit_kmh"],
            traffic_speed_kmh=d.get("traffic_speed_kmh"),
        )


@dataclass
class RoadNetwork:
    segments: list[RoadSegment]

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "RoadNetwork":
        return cls(segments=[RoadSegment.from_dict(s) for s in d["segments"]])


@dataclass
class IngestReport:
    """Audit trail of the load: rejected census rows and defaults applied."""

    census_rejections: list[dict] = field(default_factory=list)
    defaults_applied: list[str] = field(default_factory=list)
    input_rows: int = 0
    accepted_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "census_rejections": self.census_rejections,
            "defaults_applied": self.defaults_applied,
            "input_rows": self.input_rows,
            "accepted_rows": self.accepted_rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IngestReport":
        return cls(**d)


@dataclass
class Snapshot:
    """Immutable bundle of all validated inputs. Downstream modules only read."""

    trees: list[TreeRecord]
    species: dict[str, SpeciesInfo]
    scene: Optional[RasterScene]
    roads: Optional[RoadNetwork]
    report: IngestReport

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "trees": [t.to_dict() for t in self.trees],
            "species": [self.species[k].to_dict() for k in sorted(self.species)],
            "scene": self.scene.to_dict() if self.scene is not None else None,
            "roads": self.roads.to_dict() if self.roads is not None else None,
            "report": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Snapshot":
        return cls(
            trees=[TreeRecord.from_dict(t) for t in d["trees"]],
            species={s["species"]: SpeciesInfo(**s) for s in d["species"]},
            scene=RasterScene.from_dict(d["scene"]) if d.get("scene") else None,
            roads=RoadNetwork.from_dict(d["roads"]) if d.get("roads") else None,
            report=IngestReport.from_dict(d["report"]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _is_positive_finite(v: float) -> bool:
    return math.isfinite(v) and v > 0


def load_species(path: str) -> dict[str, SpeciesInfo]:
    """Species table CSV: header `species,wood_density`, one row per species."""
    if not os.path.exists(path):
        raise IngestError(f"species file not found: {path}")
    table: dict[str, SpeciesInfo] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["species", "wood_density"]:
            raise IngestError(f"malformed species header in {path}: {header}")
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            name = row[0].strip()
            try:
                density = float(row[1])
            except (IndexError, ValueError):
                raise IngestError(f"species row {lineno}: unparseable wood density")
            lo, hi = WOOD_DENSITY_RANGE
            if not (lo < density < hi):
                raise IngestError(
                    f"species row {lineno}: wood density {density} outside ({lo}, {hi}) g/cm^3"
                )
            if name in table:
                raise IngestError(f"duplicate species entry: {name}")
            table[name] = SpeciesInfo(species=name, wood_density=density)
    return table


def load_census(
    path: str, species_path: str
) -> tuple[list[TreeRecord], dict[str, SpeciesInfo], list[dict]]:
    """Load and validate the tree census.

    Returns (records, species table, rejections). Rejections carry the 1-based
    data row number and the reason; a species referenced by an accepted row but
    absent from the species table is a hard error.
    """
    if not os.path.exists(path):
        raise IngestError(f"census file not found: {path}")
    species = load_species(species_path)

    records: list[TreeRecord] = []
    rejections: list[dict] = []
    seen_ids: set[str] = set()

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"census file is empty: {path}")
        header = [h.strip() for h in header]
        if header[: len(CENSUS_HEADER)] != CENSUS_HEADER or len(header) > len(CENSUS_HEADER) + 1:
            raise IngestError(f"malformed census header: {header}")
        has_condition = len(header) == len(CENSUS_HEADER) + 1
        if has_condition and header[-1] != "condition":
            raise IngestError(f"malformed census header: {header}")

        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue

            def reject(reason: str):
                rejections.append({"row": rownum, "reason": reason})

            if len(row) < len(CENSUS_HEADER):
                reject("too few columns")
                continue
            tree_id = row[0].strip()
            if not tree_id:
                reject("empty id")
                continue
            if tree_id in seen_ids:
                reject(f"duplicate id {tree_id}")
                continue
            sp = row[3].strip()
            if not sp:
                reject("empty species")
                continue
            try:
                x, y = float(row[1]), float(row[2])
                height = float(row[4])
                girth = float(row[5])
                canopy = float(row[6])
            except ValueError:
                reject("non-numeric field")
                continue
            if not (math.isfinite(x) and math.isfinite(y)):
                reject("non-finite coordinates")
                continue
            if not _is_positive_finite(height):
                reject("height not positive")
                continue
            if not _is_positive_finite(girth):
                reject("girth not positive")
                continue
            if not (math.isfinite(canopy) and canopy >= 0):
                reject("canopy diameter negative")
                continue
            condition = row[7].strip() if has_condition and len(row) > 7 and row[7].strip() else None
            seen_ids.add(tree_id)
            records.append(
                TreeRecord(
                    id=tree_id,
                    x=x,
                    y=y,
                    species=sp,
                    height_m=height,
                    girth_cm=girth,
                    canopy_diameter_m=canopy,
                    condition=condition,
                )
            )

    missing = {r.species for r in records} - set(species)
    if missing:
        raise MissingSpeciesError(missing)
    return records, species, rejections


def _read_ascii_grid(path: str) -> tuple[dict, np.ndarray]:
    """Parse an ESRI ASCII grid into (header, north-first float array)."""
    if not os.path.exists(path):
        raise IngestError(f"grid file not found: {path}")
    header: dict[str, float] = {}
    values: list[float] = []
    header_keys = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if key in header_keys and len(parts) == 2 and key not in header:
                try:
                    header[key] = float(parts[1])
                except ValueError:
                    raise IngestError(f"unparseable header line in {path}: {line.strip()}")
            else:
                try:
                    values.extend(float(p) for p in parts)
                except ValueError:
                    raise IngestError(f"unparseable grid value in {path}: {line.strip()}")
    for required in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if required not in header:
            raise IngestError(f"grid {path} missing header field {required}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if ncols <= 0 or nrows <= 0 or header["cellsize"] <= 0:
        raise IngestError(f"grid {path} has non-positive dimensions")
    if len(values) != ncols * nrows:
        raise IngestError(
            f"grid {path}: expected {ncols * nrows} values, found {len(values)}"
        )
    header.setdefault("nodata_value", -9999.0)
    grid = np.array(values, dtype=np.float64).reshape(nrows, ncols)
    return header, grid


def load_raster(
    lst_path: str,
    nv_path: str,
    timestamp: Optional[str] = None,
    nv_is_ndvi: bool = False,
) -> RasterScene:
    """Read the LST grid and the non-vegetated mask grid.

    Both must share ncols/nrows/cellsize/corner. With `nv_is_ndvi` the second
    grid is interpreted as NDVI and converted via `ndvi < 0.2 -> NV`.
    """
    lst_hdr, lst_grid = _read_ascii_grid(lst_path)
    nv_hdr, nv_grid = _read_ascii_grid(nv_path)

    for key in ("ncols", "nrows", "cellsize", "xllcorner", "yllcorner"):
        if abs(lst_hdr[key] - nv_hdr[key]) > 1e-6:
            raise GridMismatchError(
                f"{key} differs between grids: {lst_hdr[key]} vs {nv_hdr[key]}"
            )

    nodata = lst_hdr["nodata_value"]
    lst = np.where(lst_grid == nodata, np.nan, lst_grid)
    valid = ~np.isnan(lst)
    lo, hi = LST_VALID_RANGE
    bad = valid & ((lst < lo) | (lst > hi))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise IngestError(
            f"LST value {lst[r, c]} at row {r}, col {c} outside [{lo}, {hi}] degC"
        )

    nv_nodata = nv_hdr["nodata_value"]
    if nv_is_ndvi:
        nv = (nv_grid != nv_nodata) & (nv_grid < NDVI_NV_THRESHOLD)
    else:
        nv = (nv_grid != nv_nodata) & (nv_grid != 0)

    return RasterScene(
        origin_x=lst_hdr["xllcorner"],
        origin_y=lst_hdr["yllcorner"],
        cell_size=lst_hdr["cellsize"],
        rows=int(lst_hdr["nrows"]),
        cols=int(lst_hdr["ncols"]),
        lst=lst,
        nv_mask=nv,
        timestamp=timestamp,
    )


def _parse_flag(value, default: bool = False) -> bool:
    if value is None:
        return default
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value != 0
    if isinstance(value, str):
        return value.strip().lower() in ("yes", "true", "1")
    return default


def load_roads(path: str, report: Optional[IngestReport] = None) -> RoadNetwork:
    """Road network from a GeoJSON FeatureCollection of LineStrings.

    Coordinates are assumed already projected to metres. A car-allowed segment
    without maxspeed gets 40 km/h, recorded in the ingest report.
    """
    if not os.path.exists(path):
        raise IngestError(f"roads file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise IngestError("roads file is not a GeoJSON FeatureCollection")

    segments: list[RoadSegment] = []
    seen: set[str] = set()
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        geom = feature.get("geometry") or {}
        seg_id = str(props.get("id", feature.get("id", "")))
        if geom.get("type") != "LineString":
            raise IngestError(
                f"segment {seg_id or '<unnamed>'}: geometry must be LineString, "
                f"got {geom.get('type')}"
            )
        if not seg_id:
            raise IngestError("road feature without id")
        if seg_id in seen:
            raise IngestError(f"duplicate segment id: {seg_id}")
        seen.add(seg_id)
        coords = tuple((float(c[0]), float(c[1])) for c in geom.get("coordinates", []))
        if len(coords) < 2:
            raise IngestError(f"segment {seg_id}: polyline needs at least 2 points")
        if polyline_length(coords) <= 0:
            raise IngestError(f"segment {seg_id}: zero-length polyline")

        car = _parse_flag(props.get("car"), default=False)
        foot = _parse_flag(props.get("foot"), default=True)
        maxspeed = props.get("maxspeed")
        if maxspeed is None:
            speed = DEFAULT_SPEED_KMH
            if car and report is not None:
                report.defaults_applied.append(
                    f"segment {seg_id}: maxspeed missing, default {DEFAULT_SPEED_KMH} km/h"
                )
        else:
            speed = float(maxspeed)
        if car and speed <= 0:
            raise IngestError(f"segment {seg_id}: non-positive maxspeed on car segment")

        traffic = props.get("traffic_speed")
        segments.append(
            RoadSegment(
                id=seg_id,
                coords=coords,
                highway_class=str(props.get("highway", "")),
                foot_allowed=foot,
                car_allowed=car,
                speed_limit_kmh=speed,
                traffic_speed_kmh=float(traffic) if traffic is not None else None,
            )
        )
    return RoadNetwork(segments=segments)


def build_snapshot(
    census_path: str,
    species_path: str,
    lst_path: str,
    nv_path: str,
    roads_path: str,
    timestamp: Optional[str] = None,
    nv_is_ndvi: bool = False,
) -> Snapshot:
    report = IngestReport()
    trees, species, rejections = load_census(census_path, species_path)
    report.census_rejections = rejections
    report.accepted_rows = len(trees)
    report.input_rows = len(trees) + len(rejections)
    scene = load_raster(lst_path, nv_path, timestamp=timestamp, nv_is_ndvi=nv_is_ndvi)
    roads = load_roads(roads_path, report=report)
    return Snapshot(trees=trees, species=species, scene=scene, roads=roads, report=report)


def save_snapshot(snapshot: Snapshot, path: str) -> None:
    """Serialize to JSON via an atomic replace so readers never see a torn file."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(snapshot.to_dict(), fh, sort_keys=True)
    os.replace(tmp, path)


def load_snapshot(path: str) -> Snapshot:
    if not os.path.exists(path):
        raise IngestError(f"snapshot not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return Snapshot.from_dict(json.load(fh))


def write_ascii_grid(
    path: str,
    grid: np.ndarray,
    origin_x: float,
    origin_y: float,
    cell_size: float,
    nodata: float = -9999.0,
) -> None:
    """Write a north-first float grid as ESRI ASCII; NaN becomes NODATA."""
    rows, cols = grid.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ncols {cols}\n")
        fh.write(f"nrows {rows}\n")
        fh.write(f"xllcorner {origin_x}\n")
        fh.write(f"yllcorner {origin_y}\n")
        fh.write(f"cellsize {cell_size}\n")
        fh.write(f"NODATA_value {nodata}\n")
        for row in grid:
            fh.write(" ".join(str(nodata) if math.isnan(v) else repr(v) for v in row))
            fh.write("\n")
