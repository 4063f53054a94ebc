"""Global node: per-epoch feature anonymization, cross-camera global IDs,
epoch rotation with gallery destruction, behavioral anomaly flagging, and
record persistence.

Anonymization is a per-epoch random orthogonal transform over feature space.
Within an epoch it preserves cosine similarity exactly (so matching works on
anonymized vectors); once the epoch rotates the transform and gallery are
destroyed, so nothing stored before the rotation stays linkable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .edge import LocalBatch
from .model import (
    AnomalyEvent,
    AnomalyKind,
    FeatureVector,
    GlobalRecord,
    ValidationError,
)

DEFAULT_EPOCH_MS = 30 * 60 * 1000  # transforms rotate every 30 minutes
DEFAULT_SIM_THRESHOLD = 0.7
DEFAULT_BEHAVIOR_THRESHOLD = 50.0


class StaleEpochError(ValidationError):
    """A feature from a destroyed epoch reached the matcher."""


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthogonal matrix via QR of a Gaussian matrix."""
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    # fix signs so the distribution doesn't collapse toward a QR artifact
    q = q * np.sign(np.diag(r))
    return q


@dataclass
class ReIdState:
    epoch_id: int
    epoch_started: int  # UTC ms
    transform: np.ndarray  # D x D orthogonal
    gallery: list[tuple[int, np.ndarray]] = field(default_factory=list)
    next_global_id: int = 1
    epoch_ms: int = DEFAULT_EPOCH_MS
    seed: int = 0

    @classmethod
    def fresh(cls, dim: int, started: int, seed: int = 0,
              epoch_ms: int = DEFAULT_EPOCH_MS) -> "ReIdState":
        rng = np.random.default_rng((seed, 0))
        return cls(epoch_id=0, epoch_started=started,
                   transform=random_orthogonal(dim, rng),
                   epoch_ms=epoch_ms, seed=seed)

    @property
    def dim(self) -> int:
        return self.transform.shape[0]


def transform_feature(raw: FeatureVector, s: ReIdState) -> FeatureVector:
    """Anonymize a raw feature with the current epoch's orthogonal transform."""
    if len(raw) != s.dim:
        raise ValidationError(f"feature dim {len(raw)} != configured {s.dim}")
    out = s.transform @ np.asarray(raw.values, dtype=np.float64)
    return FeatureVector(tuple(out.tolist()), epoch_id=s.epoch_id)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def match_global(f: FeatureVector, s: ReIdState,
                 sim_threshold: float = DEFAULT_SIM_THRESHOLD) -> tuple[int, bool]:
    """Match an anonymized feature against the gallery.

    Returns (global_id, matched). A match refreshes the stored vector; a miss
    assigns the next global ID (never recycled).
    """
    if f.epoch_id != s.epoch_id:
        raise StaleEpochError(
            f"feature from epoch {f.epoch_id} cannot match in epoch {s.epoch_id}"
        )
    vec = np.asarray(f.values, dtype=np.float64)
    best_idx = -1
    best_sim = -2.0
    for i, (gid, gv) in enumerate(s.gallery):
        sim = _cosine(vec, gv)
        # ties resolved toward the lowest global_id (gallery is id-ordered)
        if sim > best_sim:
            best_sim = sim
            best_idx = i
    if best_idx >= 0 and best_sim >= sim_threshold:
        gid = s.gallery[best_idx][0]
        s.gallery[best_idx] = (gid, vec)
        return gid, True
    gid = s.next_global_id
    s.next_global_id += 1
    s.gallery.append((gid, vec))
    return gid, False


def rotate_epoch(s: ReIdState, now: int) -> bool:
    """Rotate the anonymization transform if the epoch has elapsed.

    Returns True when a rotation happened. The gallery is emptied (destruction
    contract); global IDs keep counting and are never reissued.
    """
    if now - s.epoch_started < s.epoch_ms:
        return False
    s.epoch_id += 1
    s.epoch_started = now
    rng = np.random.default_rng((s.seed, s.epoch_id))
    s.transform = random_orthogonal(s.dim, rng)
    s.gallery = []
    return True


def flag_behavioral(score: float, threshold: float = DEFAULT_BEHAVIOR_THRESHOLD) -> bool:
    """True iff the frame anomaly score reaches the threshold (inclusive)."""
    if not 0.0 <= score <= 100.0:
        raise ValidationError(f"anomaly score {score} outside [0, 100]")
    if not 0.0 <= threshold <= 100.0:
        raise ValidationError(f"behavior threshold {threshold} outside [0, 100]")
    return score >= threshold


class RecordStore:
    """Append-only line-delimited store of GlobalRecord rows."""

    def __init__(self, sink: Optional[IO[str]] = None):
        self._rows: list[GlobalRecord] = []
        self._sink = sink

    def append(self, r: GlobalRecord) -> None:
        # round-trip through the wire form so anything schema-invalid is rejected
        line = r.to_json()
        GlobalRecord.from_json(line)
        self._rows.append(r)
        if self._sink is not None:
            self._sink.write(line + "\n")

    def rows(self) -> list[GlobalRecord]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)


def persist_record(r: GlobalRecord, db: RecordStore) -> None:
    db.append(r)


@dataclass
class BatchResult:
    records: list[GlobalRecord]
    events: list[AnomalyEvent]
    rotated: bool


def process_batch(b: LocalBatch, s: ReIdState, db: RecordStore,
                  sim_threshold: float = DEFAULT_SIM_THRESHOLD,
                  behavior_threshold: float = DEFAULT_BEHAVIOR_THRESHOLD) -> BatchResult:
    """Run one local batch through anonymize -> match -> persist, raising
    behavioral events for frame scores at or above the threshold."""
    rotated = rotate_epoch(s, b.window_end)
    records: list[GlobalRecord] = []
    events: list[AnomalyEvent] = []
    for entry in b.entries:
        if entry.feature is None:
            continue  # nothing to match on; skip rather than fabricate identity
        anon = transform_feature(entry.feature, s)
        gid, _ = match_global(anon, s, sim_threshold)
        score = 0.0
        for ts, sc in b.frame_anomaly_scores:
            if ts <= entry.record_time and sc > score:
                score = sc
        rec = GlobalRecord(
            global_id=gid,
            record_time=entry.record_time,
            camera_id=b.camera_id,
            bbox_tlwh=entry.bbox_tlwh,
            anomaly_score=score,
            actions=b.actions,
            objects=b.objects,
        )
        persist_record(rec, db)
        records.append(rec)
    for ts, score in b.frame_anomaly_scores:
        if flag_behavioral(score, behavior_threshold):
            category = b.actions[0] if b.actions else ""
            events.append(
                AnomalyEvent(
                    kind=AnomalyKind.BEHAVIORAL,
                    category=category,
                    camera_id=b.camera_id,
                    record_time=ts,
                    value=score,
                    message=f"behavioral anomaly score {score:g} on {b.camera_id}",
                )
            )
    return BatchResult(records=records, events=events, rotated=rotated)
