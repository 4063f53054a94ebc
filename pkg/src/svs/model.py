"""Shared vocabulary types and geometric primitives.

Everything here is an immutable value object. Nothing in this module (or
anywhere downstream) has a field capable of carrying image data: the input
boundary of the whole system is detector output, never pixels.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

POSE_KEYPOINTS = 17  # COCO keypoint layout
DEFAULT_FEATURE_DIM = 512

# Exact serialized key set of a persisted record (privacy allow-list).
GLOBAL_RECORD_KEYS = (
    "global_id",
    "record_time",
    "camera_id",
    "bbox_tlwh",
    "anomaly_score",
    "actions",
    "objects",
)


class ValidationError(ValueError):
    """Raised when a value object violates its invariants."""


class PrivacyViolationError(ValidationError):
    """Raised when data carries a field that could hold image/PII payloads."""


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class BBoxTlwh:
    """Bounding box as top-left corner plus width and height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        _require_finite("bbox", self.x, self.y, self.w, self.h)
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"bbox needs positive size, got w={self.w} h={self.h}")

    def corners(self) -> tuple[tuple[float, float], ...]:
        """(TL, TR, BL, BR) corner points."""
        x, y, w, h = self.x, self.y, self.w, self.h
        return ((x, y), (x + w, y), (x, y + h), (x + w, y + h))

    def foot_point(self) -> tuple[float, float]:
        """Bottom-center point, the ground-contact proxy used for BEV projection."""
        return (self.x + self.w / 2.0, self.y + self.h)

    def area(self) -> float:
        return self.w * self.h

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, vals: Sequence[float]) -> "BBoxTlwh":
        if len(vals) != 4:
            raise ValidationError(f"tlwh needs 4 numbers, got {len(vals)}")
        return cls(float(vals[0]), float(vals[1]), float(vals[2]), float(vals[3]))


def bbox_corners(b: BBoxTlwh) -> tuple[tuple[float, float], ...]:
    return b.corners()


def bbox_foot_point(b: BBoxTlwh) -> tuple[float, float]:
    return b.foot_point()


def bbox_iou(a: BBoxTlwh, b: BBoxTlwh) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 when identical."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    union = a.area() + b.area() - inter
    # edge arithmetic can overshoot by an ulp for identical boxes
    return min(1.0, inter / union)


@dataclass(frozen=True)
class Pose:
    """17 keypoints, each (x, y, confidence)."""

    keypoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.keypoints) != POSE_KEYPOINTS:
            raise ValidationError(
                f"pose needs exactly {POSE_KEYPOINTS} keypoints, got {len(self.keypoints)}"
            )
        for x, y, c in self.keypoints:
            _require_finite("keypoint", x, y, c)
            if not 0.0 <= c <= 1.0:
                raise ValidationError(f"keypoint confidence {c} outside [0, 1]")

    def mean_confidence(self) -> float:
        return sum(c for _, _, c in self.keypoints) / len(self.keypoints)


@dataclass(frozen=True)
class FeatureVector:
    """Appearance feature. epoch_id tells which anonymization transform produced
    it; raw (pre-anonymization) vectors carry epoch_id -1."""

    values: tuple[float, ...]
    epoch_id: int = -1

    def __post_init__(self):
        _require_finite("feature", *self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Detection:
    cls: str
    conf: float
    bbox: BBoxTlwh
    pose: Optional[Pose] = None
    feature: Optional[FeatureVector] = None

    def __post_init__(self):
        if not 0.0 <= self.conf <= 1.0:
            raise ValidationError(f"detection confidence {self.conf} outside [0, 1]")


@dataclass(frozen=True)
class FrameObservation:
    """One camera frame's detector output. The only input boundary of the system."""

    camera_id: str
    frame_index: int
    record_time: int  # UTC epoch milliseconds
    detections: tuple[Detection, ...]
    frame_anomaly_score: float
    actions: tuple[str, ...] = ()
    objects: tuple[str, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError(f"frame_index must be >= 0, got {self.frame_index}")
        if not 0.0 <= self.frame_anomaly_score <= 100.0:
            raise ValidationError(
                f"frame_anomaly_score {self.frame_anomaly_score} outside [0, 100]"
            )


@dataclass(frozen=True)
class GlobalRecord:
    """The persisted row: exactly seven fields, nothing else ever serialized."""

    global_id: int
    record_time: int
    camera_id: str
    bbox_tlwh: BBoxTlwh
    anomaly_score: float
    actions: tuple[str, ...] = ()
    objects: tuple[str, ...] = ()

    def __post_init__(self):
        if self.global_id <= 0:
            raise ValidationError(f"global_id must be positive, got {self.global_id}")
        if not 0.0 <= self.anomaly_score <= 100.0:
            raise ValidationError(f"anomaly_score {self.anomaly_score} outside [0, 100]")

    def to_json(self) -> str:
        doc = {
            "global_id": self.global_id,
            "record_time": self.record_time,
            "camera_id": self.camera_id,
            "bbox_tlwh": self.bbox_tlwh.to_list(),
            "anomaly_score": self.anomaly_score,
            "actions": list(self.actions),
            "objects": list(self.objects),
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "GlobalRecord":
        doc = json.loads(line)
        keys = set(doc)
        if keys != set(GLOBAL_RECORD_KEYS):
            extra = keys - set(GLOBAL_RECORD_KEYS)
            missing = set(GLOBAL_RECORD_KEYS) - keys
            raise ValidationError(
                f"record schema mismatch: extra={sorted(extra)} missing={sorted(missing)}"
            )
        return cls(
            global_id=int(doc["global_id"]),
            record_time=int(doc["record_time"]),
            camera_id=str(doc["camera_id"]),
            bbox_tlwh=BBoxTlwh.from_list(doc["bbox_tlwh"]),
            anomaly_score=float(doc["anomaly_score"]),
            actions=tuple(doc["actions"]),
            objects=tuple(doc["objects"]),
        )


class AnomalyKind(str, Enum):
    BEHAVIORAL = "Behavioral"
    STATISTICAL = "Statistical"


@dataclass(frozen=True)
class AnomalyEvent:
    kind: AnomalyKind
    camera_id: str
    record_time: int
    value: float  # score for Behavioral, count for Statistical
    message: str
    category: str = ""  # Behavioral only (e.g. firearm, mass gathering, ...)

    def to_doc(self) -> dict:
        return {
            "kind": self.kind.value,
            "category": self.category,
            "camera_id": self.camera_id,
            "record_time": self.record_time,
            "value": self.value,
            "message": self.message,
        }


@dataclass(frozen=True)
class CameraConfig:
    camera_id: str
    location_id: str
    display_name: str
    homography: tuple[float, ...]  # row-major 3x3, image plane -> BEV plane
    bev_extent: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    live: bool = True

    def __post_init__(self):
        if len(self.homography) != 9:
            raise ValidationError("homography must have 9 row-major entries")
        _require_finite("homography", *self.homography)
        x0, y0, x1, y1 = self.bev_extent
        if not (x0 < x1 and y0 < y1):
            raise ValidationError(f"bev_extent not well-ordered: {self.bev_extent}")
        # invertibility after scale normalization
        m = [list(self.homography[0:3]), list(self.homography[3:6]), list(self.homography[6:9])]
        scale = max(abs(v) for v in self.homography) or 1.0
        n = [[v / scale for v in row] for row in m]
        det = (
            n[0][0] * (n[1][1] * n[2][2] - n[1][2] * n[2][1])
            - n[0][1] * (n[1][0] * n[2][2] - n[1][2] * n[2][0])
            + n[0][2] * (n[1][0] * n[2][1] - n[1][1] * n[2][0])
        )
        if abs(det) <= 1e-9:
            raise ValidationError("homography is not invertible")


def load_camera_configs(text: str) -> list[CameraConfig]:
    """Parse the camera configuration document (TOML, [[cameras]] entries)."""
    import tomli

    doc = tomli.loads(text)
    cams = []
    for entry in doc.get("cameras", []):
        cams.append(
            CameraConfig(
                camera_id=entry["camera_id"],
                location_id=entry["location_id"],
                display_name=entry["display_name"],
                homography=tuple(float(v) for v in entry["homography"]),
                bev_extent=tuple(float(v) for v in entry["bev_extent"]),
                live=bool(entry.get("live", True)),
            )
        )
    return cams
