import json
import math

import numpy as np
import pytest

from verdant import ingest
from verdant.errors import GridMismatchError, IngestError, MissingSpeciesError

from conftest import COLS, ROWS, TREE_ROWS, make_roads_geojson, write_ascii


def write_census(path, rows, header="id,x,y,species,height_m,girth_cm,canopy_diameter_m"):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def write_species(path, entries=(("Ficus religiosa", 0.55), ("Neem", 0.65))):
    with open(path, "w") as fh:
        fh.write("species,wood_density\n")
        for name, rho in entries:
            fh.write(f"{name},{rho}\n")


class TestCensus:
    def test_well_formed_rows_all_accepted(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species)
        write_census(
            census,
            [
                ("t1", 10, 10, "Ficus religiosa", 12, 80, 6),
                ("t2", 20, 20, "Neem", 8, 40, 3),
                ("t3", 30, 30, "Ficus religiosa", 15, 100, 8),
            ],
        )
        records, table, rejections = ingest.load_census(str(census), str(species))
        assert len(records) == 3
        assert rejections == []
        assert records[0].height_m == 12
        assert table["Neem"].wood_density == 0.65

    def test_negative_height_rejected_with_reason(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species)
        write_census(
            census,
            [
                ("t1", 10, 10, "Neem", 12, 80, 6),
                ("t2", 20, 20, "Neem", -2, 40, 3),
                ("t3", 30, 30, "Neem", 15, 100, 8),
            ],
        )
        records, _, rejections = ingest.load_census(str(census), str(species))
        assert len(records) == 2
        assert len(rejections) == 1
        assert rejections[0]["row"] == 2
        assert "height" in rejections[0]["reason"]

    def test_missing_species_is_hard_error_naming_it(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species, entries=(("Neem", 0.65),))
        write_census(census, [("t1", 10, 10, "Ficus religiosa", 12, 80, 6)])
        with pytest.raises(MissingSpeciesError) as err:
            ingest.load_census(str(census), str(species))
        assert "Ficus religiosa" in str(err.value)

    def test_malformed_header_rejected(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species)
        write_census(census, [], header="id,lon,lat,species")
        with pytest.raises(IngestError):
            ingest.load_census(str(census), str(species))

    def test_duplicate_id_rejected_not_crash(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species)
        write_census(
            census,
            [("t1", 10, 10, "Neem", 12, 80, 6), ("t1", 20, 20, "Neem", 8, 40, 3)],
        )
        records, _, rejections = ingest.load_census(str(census), str(species))
        assert len(records) == 1
        assert "duplicate" in rejections[0]["reason"]

    def test_rejections_plus_accepted_equals_input(self, tmp_path):
        census = tmp_path / "c.csv"
        species = tmp_path / "s.csv"
        write_species(species)
        rows = [
            ("t1", 10, 10, "Neem", 12, 80, 6),
            ("t2", 0, 0, "Neem", 0, 80, 6),
            ("t3", 0, 0, "Neem", 12, -5, 6),
            ("t4", 0, 0, "Neem", 12, 80, -1),
            ("t5", 10, 30, "Neem", 9, 70, 4),
            ("t6", 10, 30, "", 9, 70, 4),
        ]
        write_census(census, rows)
        records, _, rejections = ingest.load_census(str(census), str(species))
        assert len(records) + len(rejections) == len(rows)

    def test_bad_wood_density_rejected(self, tmp_path):
        species = tmp_path / "s.csv"
        write_species(species, entries=(("Neem", 3.0),))
        with pytest.raises(IngestError):
            ingest.load_species(str(species))


class TestRaster:
    def test_small_grid_parses(self, tmp_path):
        lst, nv = tmp_path / "lst.asc", tmp_path / "nv.asc"
        with open(lst, "w") as fh:
            fh.write("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n30.0 30.0\n30.0 30.0\n")
        with open(nv, "w") as fh:
            fh.write("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n1 1\n1 1\n")
        scene = ingest.load_raster(str(lst), str(nv))
        assert scene.rows == scene.cols == 2
        assert scene.nv_mask.sum() == 4
        assert float(scene.lst[0, 0]) == 30.0

    def test_dimension_mismatch(self, tmp_path):
        lst, nv = tmp_path / "lst.asc", tmp_path / "nv.asc"
        with open(lst, "w") as fh:
            fh.write("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n30 30\n30 30\n")
        with open(nv, "w") as fh:
            fh.write("ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n1 1 1\n1 1 1\n1 1 1\n")
        with pytest.raises(GridMismatchError):
            ingest.load_raster(str(lst), str(nv))

    def test_nodata_cell_flagged_missing(self, tmp_path):
        lst, nv = tmp_path / "lst.asc", tmp_path / "nv.asc"
        with open(lst, "w") as fh:
            fh.write("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n-9999 31.0\n32.0 33.0\n")
        with open(nv, "w") as fh:
            fh.write("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n1 1\n1 1\n")
        scene = ingest.load_raster(str(lst), str(nv))
        assert math.isnan(scene.lst[0, 0])
        assert np.isfinite(scene.lst).sum() == 3

    def test_out_of_range_lst_rejected(self, tmp_path):
        lst, nv = tmp_path / "lst.asc", tmp_path / "nv.asc"
        with open(lst, "w") as fh:
            fh.write("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n120.0\n")
        with open(nv, "w") as fh:
            fh.write("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n1\n")
        with pytest.raises(IngestError):
            ingest.load_raster(str(lst), str(nv))

    def test_ndvi_conversion_flag(self, tmp_path):
        lst, nv = tmp_path / "lst.asc", tmp_path / "ndvi.asc"
        with open(lst, "w") as fh:
            fh.write("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n30 30\n")
        with open(nv, "w") as fh:
            fh.write("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n"
                     "NODATA_value -9999\n0.1 0.6\n")
        scene = ingest.load_raster(str(lst), str(nv), nv_is_ndvi=True)
        assert bool(scene.nv_mask[0, 0]) is True
        assert bool(scene.nv_mask[0, 1]) is False

    def test_cell_index_roundtrip(self, snapshot):
        scene = snapshot.scene
        row, col = scene.cell_index(55.0, 45.0)
        cx, cy = scene.cell_center(row, col)
        assert abs(cx - 55.0) <= scene.cell_size / 2
        assert abs(cy - 45.0) <= scene.cell_size / 2
        assert scene.cell_index(-1.0, 50.0) is None
        assert scene.cell_index(50.0, 10_000.0) is None


class TestRoads:
    def test_shared_endpoint_network(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"id": "a", "highway": "residential", "foot": True,
                                   "car": True, "maxspeed": 50},
                    "geometry": {"type": "LineString", "coordinates": [[0, 0], [100, 0]]},
                },
                {
                    "type": "Feature",
                    "properties": {"id": "b", "highway": "residential", "foot": True,
                                   "car": True, "maxspeed": 50},
                    "geometry": {"type": "LineString", "coordinates": [[100, 0], [100, 100]]},
                },
            ],
        }
        path = tmp_path / "roads.geojson"
        path.write_text(json.dumps(doc))
        network = ingest.load_roads(str(path))
        assert len(network.segments) == 2

    def test_polygon_feature_rejected_by_id(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"id": "oops"},
                    "geometry": {"type": "Polygon",
                                 "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]},
                }
            ],
        }
        path = tmp_path / "roads.geojson"
        path.write_text(json.dumps(doc))
        with pytest.raises(IngestError) as err:
            ingest.load_roads(str(path))
        assert "oops" in str(err.value)

    def test_duplicate_segment_id(self, tmp_path):
        feat = {
            "type": "Feature",
            "properties": {"id": "dup", "car": True, "maxspeed": 40},
            "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 0]]},
        }
        doc = {"type": "FeatureCollection", "features": [feat, feat]}
        path = tmp_path / "roads.geojson"
        path.write_text(json.dumps(doc))
        with pytest.raises(IngestError):
            ingest.load_roads(str(path))

    def test_missing_maxspeed_defaults_to_40_and_reported(self, snapshot):
        seg = next(s for s in snapshot.roads.segments if s.id == "s5")
        assert seg.speed_limit_kmh == 40.0
        assert any("s5" in note for note in snapshot.report.defaults_applied)


class TestSnapshot:
    def test_idempotent_load(self, data_dir):
        kwargs = dict(timestamp="2024-05-01")
        args = [
            str(data_dir / "census.csv"),
            str(data_dir / "species.csv"),
            str(data_dir / "lst.asc"),
            str(data_dir / "nv.asc"),
            str(data_dir / "roads.geojson"),
        ]
        first = ingest.build_snapshot(*args, **kwargs)
        second = ingest.build_snapshot(*args, **kwargs)
        assert first == second

    def test_save_load_roundtrip(self, snapshot, tmp_path):
        path = tmp_path / "snap.json"
        ingest.save_snapshot(snapshot, str(path))
        loaded = ingest.load_snapshot(str(path))
        assert loaded == snapshot

    def test_counts_add_up(self, snapshot):
        report = snapshot.report
        assert report.accepted_rows == len(TREE_ROWS)
        assert report.input_rows == report.accepted_rows + len(report.census_rejections)
        assert snapshot.scene.rows == ROWS
        assert snapshot.scene.cols == COLS
