"""HTTP JSON API over an immutable snapshot.

Citizen measurement submissions are held in a pending store (single JSON
file, single-writer lock) and only join the analysis once accepted, so
unreviewed data never contaminates scores. All metric payloads come from the
same pipeline functions the CLI uses.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import dendrometry, greening, pipeline, routing
from .errors import (
    InsufficientExifError,
    MissingSpeciesError,
    NotFoundError,
    UnknownSegmentError,
    VerdantError,
)
from .ingest import Snapshot, TreeRecord

HTTP_STATUS_BY_CODE = {
    "unknown_segment": 404,
    "unknown_archetype": 404,
    "not_found": 404,
    "internal": 500,
}
DEFAULT_HTTP_STATUS = 422


class CalibrationInput(BaseModel):
    ref_width_m: float
    ref_distance_m: float
    ref_span_px: float


class MeasurementSubmission(BaseModel):
    mask_path: str
    distance_m: float
    position: tuple[float, float]
    species: str
    submitted_at: Optional[str] = None
    image_width_px: Optional[int] = None
    image_height_px: Optional[int] = None
    camera_constant: Optional[float] = None
    focal_35mm_equiv: Optional[float] = None
    focal_length_mm: Optional[float] = None
    sensor_width_mm: Optional[float] = None
    calibration: Optional[CalibrationInput] = None
    dbh_row_px: Optional[int] = None


class RouteRequest(BaseModel):
    origin: tuple[float, float]
    destination: tuple[float, float]
    mode: str = "car"
    alpha: float = 1.0
    beta: float = 0.01
    gamma: float = 500.0


class LoopRequest(BaseModel):
    start: tuple[float, float]
    minutes: float
    walking_speed_kmh: float = 5.0


class SimulateRequest(BaseModel):
    polygon: list[tuple[float, float]]
    archetype: str
    spacing_m: Optional[float] = None


class PendingStore:
    """Persistent store of citizen submissions; writes are serialized."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._lock = threading.Lock()
        self.records: dict[str, dict] = {}
        self._counter = 0
        if path and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            self.records = doc.get("records", {})
            self._counter = doc.get("counter", len(self.records))

    def _persist(self):
        if not self.path:
            return
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"records": self.records, "counter": self._counter}, fh, sort_keys=True)
        os.replace(tmp, self.path)

    def add(self, payload: dict) -> str:
        with self._lock:
            self._counter += 1
            record_id = f"citizen-{self._counter}"
            payload["id"] = record_id
            payload["status"] = "citizen_pending"
            self.records[record_id] = payload
            self._persist()
            return record_id

    def accept(self, record_id: str) -> dict:
        with self._lock:
            record = self.records.get(record_id)
            if record is None:
                raise NotFoundError(f"measurement {record_id} not found")
            record["status"] = "accepted"
            self._persist()
            return record

    def get(self, record_id: str) -> Optional[dict]:
        return self.records.get(record_id)

    def accepted_trees(self) -> list[TreeRecord]:
        return [
            TreeRecord(
                id=r["id"],
                x=r["x"],
                y=r["y"],
                species=r["species"],
                height_m=r["height_m"],
                girth_cm=r["girth_cm"],
                canopy_diameter_m=r["canopy_diameter_m"],
                condition="citizen",
            )
            for r in self.records.values()
            if r["status"] == "accepted"
        ]


def _measure_submission(sub: MeasurementSubmission) -> dict:
    mask = dendrometry.SegmentationMask.from_pgm(sub.mask_path)
    width = sub.image_width_px if sub.image_width_px is not None else mask.width
    height = sub.image_height_px if sub.image_height_px is not None else mask.height

    pathways = [
        sub.camera_constant is not None,
        sub.focal_35mm_equiv is not None
        or (sub.focal_length_mm is not None and sub.sensor_width_mm is not None),
        sub.calibration is not None,
    ]
    if sum(pathways) != 1:
        raise InsufficientExifError(
            "exactly one camera-constant pathway must be supplied "
            "(direct constant, EXIF fields, or calibration reference)"
        )
    if sub.camera_constant is not None:
        profile = dendrometry.CameraProfile(
            camera_constant=sub.camera_constant, source=dendrometry.SOURCE_CALIBRATED
        )
    elif sub.calibration is not None:
        profile = dendrometry.camera_constant_from_calibration(
            sub.calibration.ref_width_m,
            sub.calibration.ref_distance_m,
            sub.calibration.ref_span_px,
            width,
        )
    else:
        profile = dendrometry.camera_constant_from_exif(
            focal_length_mm=sub.focal_length_mm,
            focal_35mm_equiv=sub.focal_35mm_equiv,
            sensor_width_mm=sub.sensor_width_mm,
        )
    ctx = dendrometry.MeasurementContext(
        profile=profile,
        distance_m=sub.distance_m,
        image_width_px=width,
        image_height_px=height,
    )
    m = dendrometry.measure_tree(mask, ctx, dbh_row_px=sub.dbh_row_px)
    return {
        "x": sub.position[0],
        "y": sub.position[1],
        "species": sub.species.strip(),
        "height_m": m.height_m,
        "canopy_diameter_m": m.canopy_diameter_m,
        "girth_cm": m.girth_m * 100.0,
        "dbh_m": m.dbh_m,
        "camera_constant": profile.camera_constant,
        "camera_source": profile.source,
        "submitted_at": sub.submitted_at,
    }


def create_app(snapshot: Snapshot, pending_store_path: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="verdant", version="0.1.0")

    origin = os.environ.get("VERDANT_UI_ORIGIN")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[origin] if origin else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    state = {
        "snapshot": snapshot,
        "pending": PendingStore(pending_store_path),
        "analysis": None,
        "graph": None,
    }
    analysis_lock = threading.Lock()

    def current_analysis() -> pipeline.Analysis:
        with analysis_lock:
            if state["analysis"] is None:
                state["analysis"] = pipeline.analyze(
                    state["snapshot"], extra_trees=state["pending"].accepted_trees()
                )
                state["graph"] = None
            return state["analysis"]

    def current_graph() -> routing.RoadGraph:
        analysis = current_analysis()
        with analysis_lock:
            if state["graph"] is None:
                state["graph"] = pipeline.build_scored_graph(state["snapshot"], analysis)
            return state["graph"]

    def invalidate():
        with analysis_lock:
            state["analysis"] = None
            state["graph"] = None

    @app.exception_handler(VerdantError)
    async def verdant_error_handler(_req: Request, exc: VerdantError):
        status = HTTP_STATUS_BY_CODE.get(exc.code, DEFAULT_HTTP_STATUS)
        return JSONResponse(status_code=status, content=exc.to_dict())

    @app.exception_handler(ValueError)
    async def value_error_handler(_req: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content={"code": "invalid_input", "message": str(exc), "details": {}},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "trees": len(state["snapshot"].trees)}

    @app.post("/measurements", status_code=201)
    def submit_measurement(sub: MeasurementSubmission):
        measured = _measure_submission(sub)
        record_id = state["pending"].add(measured)
        return state["pending"].get(record_id)

    @app.get("/measurements")
    def list_measurements():
        return list(state["pending"].records.values())

    @app.get("/measurements/{record_id}")
    def get_measurement(record_id: str):
        record = state["pending"].get(record_id)
        if record is None:
            raise NotFoundError(f"measurement {record_id} not found")
        return record

    @app.patch("/measurements/{record_id}/accept")
    def accept_measurement(record_id: str):
        record = state["pending"].get(record_id)
        if record is None:
            raise NotFoundError(f"measurement {record_id} not found")
        if record["species"] not in state["snapshot"].species:
            raise MissingSpeciesError([record["species"]])
        record = state["pending"].accept(record_id)
        invalidate()
        return record

    @app.post("/route")
    def route(req: RouteRequest):
        weights = routing.DhcWeights(alpha=req.alpha, beta=req.beta, gamma=req.gamma)
        result = routing.route_pair(
            current_graph(), req.origin, req.destination, req.mode, weights=weights
        )
        return result.to_dict()

    @app.post("/loop")
    def loop(req: LoopRequest):
        result = routing.serenity_loop(
            current_graph(), req.start, req.minutes, walking_speed_kmh=req.walking_speed_kmh
        )
        return result.to_dict()

    @app.post("/simulate")
    def simulate(req: SimulateRequest):
        analysis = current_analysis()
        scenario = pipeline.scenario_for_archetype(analysis, req.archetype, req.polygon)
        outcome = greening.simulate_planting(
            scenario, state["snapshot"].scene, spacing_m=req.spacing_m
        )
        return outcome.to_dict()

    @app.get("/segments/{segment_id}")
    def segment(segment_id: str):
        analysis = current_analysis()
        for attrs in analysis.attributes:
            if attrs.segment_id == segment_id:
                seq, serenity = analysis.scores[segment_id]
                d = attrs.to_dict()
                d["seq"] = seq
                d["serenity"] = serenity
                return d
        raise UnknownSegmentError(f"segment {segment_id} not found")

    @app.get("/archetypes")
    def archetypes():
        analysis = current_analysis()
        return [e.to_dict() for e in pipeline.archetype_catalog(analysis)]

    return app
