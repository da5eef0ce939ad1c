"""Shared fixtures: a small but complete city snapshot written to disk once
per session, exercised by ingest, pipeline, CLI and service tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from verdant import ingest
from verdant.ingest import RoadNetwork, RoadSegment

CELL = 10.0
COLS = 40
ROWS = 30

FICUS = "Ficus religiosa"
TAMARIND = "Tamarindus indica"
NEEM = "Azadirachta indica"

TREE_ROWS = [
    # id, x, y, species, height_m, girth_cm, canopy_m
    ("f1", 55, 45, FICUS, 6, 40, 3),
    ("f2", 75, 55, FICUS, 8, 50, 4),
    ("f3", 95, 45, FICUS, 10, 60, 5),
    ("f4", 115, 57, FICUS, 12, 70, 6),
    ("f5", 135, 45, FICUS, 14, 80, 7),
    ("f6", 155, 55, FICUS, 16, 90, 8),
    ("f7", 175, 45, FICUS, 18, 100, 9),
    ("f8", 195, 52, FICUS, 20, 110, 10),
    ("f9", 215, 48, FICUS, 22, 120, 11),
    ("f10", 235, 55, FICUS, 24, 130, 12),
    ("t1", 45, 60, TAMARIND, 10, 60, 5),
    ("t2", 55, 90, TAMARIND, 12, 75, 6),
    ("t3", 48, 120, TAMARIND, 14, 90, 7),
    ("t4", 58, 145, TAMARIND, 16, 105, 8),
    ("t5", 90, 145, TAMARIND, 18, 120, 9),
    ("a1", 255, 60, NEEM, 9, 55, 4),
    ("a2", 300, 250, NEEM, 11, 65, 5),
]


def veg_cell(row: int, col: int) -> bool:
    return (row * 3 + col) % 5 == 0


def lst_value(row: int, col: int) -> float:
    if veg_cell(row, col):
        return 28.0 + ((row + col) % 3)
    return 34.0 + ((row * 7 + col * 3) % 10)


def write_ascii(path: Path, values, nodata=-9999.0):
    with open(path, "w") as fh:
        fh.write(f"ncols {COLS}\nnrows {ROWS}\n")
        fh.write("xllcorner 0.0\nyllcorner 0.0\n")
        fh.write(f"cellsize {CELL}\nNODATA_value {nodata}\n")
        for row in values:
            fh.write(" ".join(str(v) for v in row) + "\n")


def make_roads_geojson() -> dict:
    def feat(seg_id, coords, highway="residential", foot=True, car=True, maxspeed=50):
        props = {"id": seg_id, "highway": highway, "foot": foot, "car": car}
        if maxspeed is not None:
            props["maxspeed"] = maxspeed
        return {
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "LineString", "coordinates": coords},
        }

    return {
        "type": "FeatureCollection",
        "features": [
            feat("s1", [[50, 50], [150, 50]]),
            feat("s2", [[150, 50], [250, 50]]),
            feat("s3", [[50, 50], [50, 150]], maxspeed=30),
            feat("s4", [[150, 50], [150, 150]], car=False, maxspeed=None),
            feat("s5", [[50, 150], [150, 150]], maxspeed=None),
            feat("s6", [[250, 50], [250, 150]], foot=False, maxspeed=60),
        ],
    }


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("cityfixture")

    with open(root / "species.csv", "w") as fh:
        fh.write("species,wood_density\n")
        fh.write(f"{FICUS},0.55\n{TAMARIND},0.75\n{NEEM},0.65\n")

    with open(root / "census.csv", "w") as fh:
        fh.write("id,x,y,species,height_m,girth_cm,canopy_diameter_m,condition\n")
        for tid, x, y, sp, h, g, c in TREE_ROWS:
            fh.write(f"{tid},{x},{y},{sp},{h},{g},{c},\n")

    lst = [[lst_value(r, c) for c in range(COLS)] for r in range(ROWS)]
    lst[0][0] = -9999.0  # one missing cell in the far NW corner
    write_ascii(root / "lst.asc", lst)

    nv = [[0 if veg_cell(r, c) else 1 for c in range(COLS)] for r in range(ROWS)]
    write_ascii(root / "nv.asc", nv)

    with open(root / "roads.geojson", "w") as fh:
        json.dump(make_roads_geojson(), fh)

    polygon = {
        "type": "Feature",
        "properties": {},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[[260, 200], [380, 200], [380, 280], [260, 280], [260, 200]]],
        },
    }
    with open(root / "polygon.geojson", "w") as fh:
        json.dump(polygon, fh)

    return root


@pytest.fixture(scope="session")
def snapshot(data_dir) -> ingest.Snapshot:
    return ingest.build_snapshot(
        str(data_dir / "census.csv"),
        str(data_dir / "species.csv"),
        str(data_dir / "lst.asc"),
        str(data_dir / "nv.asc"),
        str(data_dir / "roads.geojson"),
        timestamp="2024-05-01",
    )


@pytest.fixture(scope="session")
def snapshot_path(data_dir, snapshot) -> Path:
    path = data_dir / "snapshot.json"
    ingest.save_snapshot(snapshot, str(path))
    return path


def make_network(specs) -> RoadNetwork:
    """specs: iterable of (id, coords, foot, car, speed[, traffic])."""
    segments = []
    for spec in specs:
        seg_id, coords, foot, car, speed = spec[:5]
        traffic = spec[5] if len(spec) > 5 else None
        segments.append(
            RoadSegment(
                id=seg_id,
                coords=tuple(tuple(map(float, c)) for c in coords),
                highway_class="residential",
                foot_allowed=foot,
                car_allowed=car,
                speed_limit_kmh=float(speed),
                traffic_speed_kmh=traffic,
            )
        )
    return RoadNetwork(segments=segments)


def grid_network(nx: int, ny: int, spacing: float = 100.0, foot=True, car=True, speed=40.0):
    """Uniform grid of nx*ny nodes; returns (network, uniform scores dict)."""
    specs = []
    for i in range(nx):
        for j in range(ny):
            x, y = i * spacing, j * spacing
            if i + 1 < nx:
                specs.append(
                    (f"h{i}_{j}", [[x, y], [x + spacing, y]], foot, car, speed)
                )
            if j + 1 < ny:
                specs.append(
                    (f"v{i}_{j}", [[x, y], [x, y + spacing]], foot, car, speed)
                )
    network = make_network(specs)
    scores = {seg.id: (0.5, 0.5) for seg in network.segments}
    return network, scores


@pytest.fixture(scope="session")
def uniform_grid_graph():
    from verdant.routing import build_graph

    network, scores = grid_network(29, 5)
    return build_graph(network, scores)


def gamma_fixture():
    """20-node fixture with three corridors of increasing quality and
    decreasing speed between (0,0) and (2000,0), plus padding spurs."""
    corridors = {
        # seq, serenity, speed, chain of points
        "fast": (0.10, 0.1, 80, [[0, 0], [500, 0], [1000, 0], [1500, 0], [2000, 0]]),
        "mid": (0.55, 0.5, 50,
                [[0, 0], [0, 200], [500, 200], [1000, 200], [1500, 200],
                 [2000, 200], [2000, 0]]),
        "green": (0.95, 0.9, 35,
                  [[0, 0], [0, -400], [500, -400], [1000, -400], [1500, -400],
                   [2000, -400], [2000, 0]]),
        "pad1": (0.30, 0.3, 40, [[500, 0], [500, -150], [1000, -150], [1000, 0]]),
        "pad2": (0.40, 0.4, 40, [[1500, 200], [1500, 350], [2000, 350]]),
        "pad3": (0.40, 0.4, 40, [[1000, 200], [1000, 350]]),
    }
    specs, scores = [], {}
    for name, (seq, ser, speed, chain) in corridors.items():
        for k in range(len(chain) - 1):
            seg_id = f"{name}_{k}"
            specs.append((seg_id, [chain[k], chain[k + 1]], True, True, speed))
            scores[seg_id] = (seq, ser)
    return make_network(specs), scores


@pytest.fixture(scope="session")
def gamma_fixture_graph():
    from verdant.routing import build_graph

    network, scores = gamma_fixture()
    return build_graph(network, scores)
