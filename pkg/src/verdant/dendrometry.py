"""Photogrammetric tree measurement from segmentation masks.

The model is pure similar triangles: a camera constant C (sensor width over
focal length) converts object distance to scene width, and the scale factor
S = scene width / image width turns pixel extents into metres. Orthogonal
camera pose and trusted distance are assumed; with exact inputs the pipeline
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DbhRowEmptyError, InsufficientExifError

FULL_FRAME_WIDTH_MM = 36.0
BREAST_HEIGHT_M = 1.37

SOURCE_EXIF = "EXIF"
SOURCE_CALIBRATED = "CALIBRATED"


@dataclass(frozen=True)
class CameraProfile:
    """Camera constant C = sensor width / focal length, with provenance."""

    camera_constant: float
    source: str
    sensor_width_mm: Optional[float] = None
    focal_length_mm: Optional[float] = None

    def __post_init__(self):
        if not (self.camera_constant > 0):
            raise ValueError("camera constant must be positive")
        if self.source not in (SOURCE_EXIF, SOURCE_CALIBRATED):
            raise ValueError(f"unknown camera profile source: {self.source}")
        if self.sensor_width_mm is not None and self.focal_length_mm is not None:
            derived = self.sensor_width_mm / self.focal_length_mm
            if abs(derived - self.camera_constant) > 1e-9 * abs(derived):
                raise ValueError("camera constant inconsistent with sensor/focal pair")


@dataclass(frozen=True)
class MeasurementContext:
    profile: CameraProfile
    distance_m: float
    image_width_px: int
    image_height_px: int

    def __post_init__(self):
        if not (self.distance_m > 0):
            raise ValueError("distance to object must be positive")
        if self.image_width_px <= 0 or self.image_height_px <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass
class SegmentationMask:
    """Boolean subject bitmap matching the context image dimensions."""

    width: int
    height: int
    bitmap: np.ndarray  # bool (height, width)

    @classmethod
    def from_array(cls, bitmap: np.ndarray) -> "SegmentationMask":
        bm = np.asarray(bitmap, dtype=bool)
        if bm.ndim != 2:
            raise ValueError("mask bitmap must be 2-D")
        return cls(width=bm.shape[1], height=bm.shape[0], bitmap=bm)

    @classmethod
    def from_pgm(cls, path: str) -> "SegmentationMask":
        """Read a PGM mask (P2 ascii or P5 binary); nonzero pixels are subject."""
        with open(path, "rb") as fh:
            data = fh.read()

        tokens: list[bytes] = []
        pos = 0
        # header tokenizer that skips '#' comments
        while len(tokens) < 4 and pos < len(data):
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if pos < len(data) and data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
        if len(tokens) < 4:
            raise ValueError(f"truncated PGM header in {path}")
        magic, w_s, h_s, maxval_s = tokens
        width, height, maxval = int(w_s), int(h_s), int(maxval_s)
        if width <= 0 or height <= 0:
            raise ValueError(f"bad PGM dimensions in {path}")

        if magic == b"P2":
            values = np.array(data[pos:].split(), dtype=np.int64)
        elif magic == b"P5":
            pos += 1  # single whitespace after maxval
            dtype = np.dtype(">u2") if maxval > 255 else np.uint8
            values = np.frombuffer(data, dtype=dtype, offset=pos, count=width * height)
            values = values.astype(np.int64)
        else:
            raise ValueError(f"not a PGM file (magic {magic!r}): {path}")
        if values.size != width * height:
            raise ValueError(f"PGM pixel count mismatch in {path}")
        bitmap = values.reshape(height, width) != 0
        return cls(width=width, height=height, bitmap=bitmap)


@dataclass(frozen=True)
class TreeMeasurement:
    height_m: float
    canopy_diameter_m: float
    dbh_m: float
    girth_m: float
    dbh_row_px: int

    def to_dict(self) -> dict:
        return {
            "height_m": self.height_m,
            "canopy_diameter_m": self.canopy_diameter_m,
            "dbh_m": self.dbh_m,
            "girth_m": self.girth_m,
            "dbh_row_px": self.dbh_row_px,
        }


def camera_constant_from_exif(
    focal_length_mm: Optional[float] = None,
    focal_35mm_equiv: Optional[float] = None,
    sensor_width_mm: Optional[float] = None,
) -> CameraProfile:
    """EXIF pathway. A 35 mm equivalent focal length wins when present
    (C = 36 / f35); otherwise the sensor-width/focal pair is used."""
    if focal_35mm_equiv is not None:
        if focal_35mm_equiv <= 0:
            raise InsufficientExifError("35mm-equivalent focal length must be positive")
        return CameraProfile(
            camera_constant=FULL_FRAME_WIDTH_MM / focal_35mm_equiv,
            source=SOURCE_EXIF,
        )
    if focal_length_mm is not None and sensor_width_mm is not None:
        if focal_length_mm <= 0 or sensor_width_mm <= 0:
            raise InsufficientExifError("focal length and sensor width must be positive")
        return CameraProfile(
            camera_constant=sensor_width_mm / focal_length_mm,
            source=SOURCE_EXIF,
            sensor_width_mm=sensor_width_mm,
            focal_length_mm=focal_length_mm,
        )
    raise InsufficientExifError(
        "EXIF metadata insufficient: need focal_35mm_equiv or focal_length_mm + sensor_width_mm"
    )


def camera_constant_from_calibration(
    ref_width_m: float,
    ref_distance_m: float,
    ref_span_px: float,
    image_width_px: int,
) -> CameraProfile:
    """Calibration pathway: a reference object of known width at a known
    distance, spanning a known pixel count, inverted for C."""
    for name, v in (
        ("ref_width_m", ref_width_m),
        ("ref_distance_m", ref_distance_m),
        ("ref_span_px", ref_span_px),
        ("image_width_px", image_width_px),
    ):
        if not (v > 0):
            raise ValueError(f"{name} must be positive")
    if ref_span_px > image_width_px:
        raise ValueError("reference span cannot exceed image width")
    scene_width_m = ref_width_m * image_width_px / ref_span_px
    return CameraProfile(
        camera_constant=scene_width_m / ref_distance_m, source=SOURCE_CALIBRATED
    )


def scale_factor(ctx: MeasurementContext) -> float:
    """Metres per pixel at the context distance."""
    return ctx.distance_m * ctx.profile.camera_constant / ctx.image_width_px


def measure_tree(
    mask: SegmentationMask,
    ctx: MeasurementContext,
    dbh_row_px: Optional[int] = None,
) -> TreeMeasurement:
    """Extract height, canopy diameter and DBH from a subject mask.

    Height and canopy span the mask's bounding box. DBH is the longest
    contiguous run on the chosen pixel row (disjoint foliage pixels at trunk
    height are excluded); the default row sits 1.37 m above the mask bottom.
    Girth is pi times DBH.
    """
    if mask.width != ctx.image_width_px or mask.height != ctx.image_height_px:
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match context image "
            f"{ctx.image_width_px}x{ctx.image_height_px}"
        )
    if not mask.bitmap.any():
        raise ValueError("mask has no subject pixels")

    s = scale_factor(ctx)
    rows = np.flatnonzero(mask.bitmap.any(axis=1))
    cols = np.flatnonzero(mask.bitmap.any(axis=0))
    min_row, max_row = int(rows[0]), int(rows[-1])
    min_col, max_col = int(cols[0]), int(cols[-1])

    height_m = (max_row - min_row + 1) * s
    canopy_m = (max_col - min_col + 1) * s

    if dbh_row_px is None:
        # image rows grow downward, so "above the bottom" subtracts pixels
        row = max_row - int(round(BREAST_HEIGHT_M / s))
    else:
        row = int(dbh_row_px)

    if row < 0 or row >= mask.height or not mask.bitmap[row].any():
        raise DbhRowEmptyError(
            f"row {row} does not intersect the mask; select a visible portion of the trunk",
            row=row,
        )

    line = mask.bitmap[row]
    best = run = 0
    for v in line:
        run = run + 1 if v else 0
        if run > best:
            best = run
    dbh_m = best * s
    return TreeMeasurement(
        height_m=height_m,
        canopy_diameter_m=canopy_m,
        dbh_m=dbh_m,
        girth_m=math.pi * dbh_m,
        dbh_row_px=row,
    )
