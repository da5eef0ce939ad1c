"""Exception hierarchy. Every error carries a stable machine code so that the
CLI and the HTTP service can map failures one-to-one."""

from __future__ import annotations


class VerdantError(Exception):
    """Base class for all domain errors."""

    code = "internal"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class IngestError(VerdantError):
    code = "ingest"


class MissingSpeciesError(IngestError):
    """Census references species absent from the species table."""

    code = "missing_species"

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(
            "species missing from species table: " + ", ".join(self.missing),
            missing=self.missing,
        )


class GridMismatchError(IngestError):
    code = "grid_mismatch"


class InsufficientExifError(VerdantError):
    """EXIF metadata cannot yield a camera constant; fall through to calibration."""

    code = "insufficient_exif"


class DbhRowEmptyError(VerdantError):
    code = "dbh_row_empty"


class OutsideSceneError(VerdantError):
    code = "outside_scene"


class InsufficientBaselineError(VerdantError):
    """Too few non-vegetated pixels in the buffer; the metric is undefined."""

    code = "insufficient_baseline"


class EmptyPolygonError(VerdantError):
    code = "empty_polygon"


class SnapError(VerdantError):
    code = "snap_failed"


class NoRouteError(VerdantError):
    code = "no_route"


class NoLoopError(VerdantError):
    code = "no_loop"


class NotFoundError(VerdantError):
    code = "not_found"


class UnknownArchetypeError(VerdantError):
    code = "unknown_archetype"


class UnknownSegmentError(VerdantError):
    code = "unknown_segment"
