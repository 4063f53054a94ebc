"""Local (edge) node: trace ingestion, pedestrian filtering, local-ID tracking,
best-representation selection, and per-window batching toward the global node.

The input is a recorded detector trace, never video. Ingestion enforces a
strict key allow-list so that anything pixel-like is rejected at the boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Optional

from .model import (
    BBoxTlwh,
    Detection,
    FeatureVector,
    FrameObservation,
    Pose,
    PrivacyViolationError,
    ValidationError,
    bbox_iou,
)

# Allow-listed keys of the trace format; anything else is rejected.
FRAME_KEYS = {"frame", "ts_ms", "camera_id", "detections", "frame_anomaly_score", "actions", "objects"}
DETECTION_KEYS = {"class", "conf", "tlwh", "pose", "feature"}

# Keys that would indicate pixel payloads; named explicitly in errors.
FORBIDDEN_KEYS = {"image", "frame_data", "pixels", "jpeg", "png", "crop"}

DEFAULT_CONF_FLOOR = 0.3
DEFAULT_IOU_THRESHOLD = 0.3
DEFAULT_MAX_AGE = 30
DEFAULT_WINDOW_MS = 1000


class TraceError(ValueError):
    """Malformed or out-of-order trace input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"trace line {line_no}: {message}")
        self.line_no = line_no


def _parse_detection(doc: dict, line_no: int) -> Detection:
    unknown = set(doc) - DETECTION_KEYS
    if unknown & FORBIDDEN_KEYS:
        raise PrivacyViolationError(
            f"trace line {line_no}: forbidden key(s) {sorted(unknown & FORBIDDEN_KEYS)}"
        )
    if unknown:
        raise TraceError(line_no, f"unknown detection key(s) {sorted(unknown)}")
    pose = None
    if doc.get("pose") is not None:
        pose = Pose(tuple((float(x), float(y), float(c)) for x, y, c in doc["pose"]))
    feature = None
    if doc.get("feature") is not None:
        feature = FeatureVector(tuple(float(v) for v in doc["feature"]))
    return Detection(
        cls=str(doc["class"]),
        conf=float(doc["conf"]),
        bbox=BBoxTlwh.from_list(doc["tlwh"]),
        pose=pose,
        feature=feature,
    )


def ingest_trace(source: IO[bytes] | IO[str] | Iterable[bytes | str]) -> Iterator[FrameObservation]:
    """Yield validated observations from a line-delimited trace, in file order.

    Enforces per-camera ordering (frame_index strictly increasing, record_time
    non-decreasing) and the privacy allow-list.
    """
    last_frame: dict[str, int] = {}
    last_ts: dict[str, int] = {}
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceError(line_no, f"invalid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise TraceError(line_no, "record is not an object")
        unknown = set(doc) - FRAME_KEYS
        if unknown & FORBIDDEN_KEYS:
            raise PrivacyViolationError(
                f"trace line {line_no}: forbidden key(s) {sorted(unknown & FORBIDDEN_KEYS)}"
            )
        if unknown:
            raise TraceError(line_no, f"unknown key(s) {sorted(unknown)}")
        try:
            obs = FrameObservation(
                camera_id=str(doc["camera_id"]),
                frame_index=int(doc["frame"]),
                record_time=int(doc["ts_ms"]),
                detections=tuple(_parse_detection(d, line_no) for d in doc.get("detections", [])),
                frame_anomaly_score=float(doc.get("frame_anomaly_score", 0.0)),
                actions=tuple(doc.get("actions", [])),
                objects=tuple(doc.get("objects", [])),
            )
        except KeyError as e:
            raise TraceError(line_no, f"missing key {e}") from e
        except (PrivacyViolationError, TraceError):
            raise
        except ValidationError as e:
            raise TraceError(line_no, str(e)) from e
        cam = obs.camera_id
        if cam in last_frame and obs.frame_index <= last_frame[cam]:
            raise TraceError(
                line_no,
                f"frame_index {obs.frame_index} not increasing for camera {cam} "
                f"(last {last_frame[cam]})",
            )
        if cam in last_ts and obs.record_time < last_ts[cam]:
            raise TraceError(
                line_no,
                f"record_time {obs.record_time} decreasing for camera {cam}",
            )
        last_frame[cam] = obs.frame_index
        last_ts[cam] = obs.record_time
        yield obs


def filter_pedestrians(obs: FrameObservation, conf_floor: float = DEFAULT_CONF_FLOOR) -> list[Detection]:
    return [d for d in obs.detections if d.cls == "person" and d.conf >= conf_floor]


def quality_score(d: Detection) -> float:
    """Representation quality: detector confidence weighted by pose confidence.

    A detection without a pose scores 0 and can never become a track's best."""
    if d.pose is None:
        return 0.0
    return d.conf * d.pose.mean_confidence()


@dataclass
class Tracklet:
    local_id: int
    camera_id: str
    last_bbox: BBoxTlwh
    last_seen_frame: int
    last_record_time: int
    history: list[tuple[int, Detection]] = field(default_factory=list)
    best_quality: float = 0.0
    best_frame: int = -1
    best: Optional[Detection] = None

    def observe(self, frame: int, record_time: int, det: Detection) -> None:
        self.last_bbox = det.bbox
        self.last_seen_frame = frame
        self.last_record_time = record_time
        self.history.append((frame, det))
        q = quality_score(det)
        # later frame wins on ties: fresher appearance
        if q >= self.best_quality:
            self.best_quality = q
            self.best_frame = frame
            self.best = det


def select_best_representation(t: Tracklet) -> Detection:
    if not t.history:
        raise ValidationError(f"tracklet {t.local_id} has no history")
    assert t.best is not None
    return t.best


@dataclass(frozen=True)
class BatchEntry:
    local_id: int
    best: Detection
    feature: Optional[FeatureVector]  # raw, pre-anonymization
    record_time: int
    bbox_tlwh: BBoxTlwh


@dataclass(frozen=True)
class LocalBatch:
    camera_id: str
    window_start: int
    window_end: int
    entries: tuple[BatchEntry, ...]
    frame_anomaly_scores: tuple[tuple[int, float], ...]
    actions: tuple[str, ...]
    objects: tuple[str, ...]


class Tracker:
    """Greedy-IoU association assigning per-camera local IDs.

    Local IDs are sequential per camera and never reused; tracklets unseen for
    more than max_age frames are retired.
    """

    def __init__(self, camera_id: str, iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                 max_age: int = DEFAULT_MAX_AGE):
        self.camera_id = camera_id
        self.iou_threshold = iou_threshold
        self.max_age = max_age
        self.active: list[Tracklet] = []
        self._next_id = 1

    def step(self, dets: list[Detection], frame: int, record_time: int) -> list[tuple[int, Detection]]:
        """Associate one frame's detections; returns (local_id, detection) pairs."""
        pairs = []
        for ti, track in enumerate(self.active):
            for di, det in enumerate(dets):
                iou = bbox_iou(track.last_bbox, det.bbox)
                if iou >= self.iou_threshold:
                    pairs.append((iou, ti, di))
        # greedy by descending IoU; stable tie-break on (track, detection) order
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
        used_tracks: set[int] = set()
        used_dets: set[int] = set()
        assignments: list[tuple[int, Detection]] = []
        for _, ti, di in pairs:
            if ti in used_tracks or di in used_dets:
                continue
            used_tracks.add(ti)
            used_dets.add(di)
            track = self.active[ti]
            track.observe(frame, record_time, dets[di])
            assignments.append((track.local_id, dets[di]))
        for di, det in enumerate(dets):
            if di in used_dets:
                continue
            track = Tracklet(
                local_id=self._next_id,
                camera_id=self.camera_id,
                last_bbox=det.bbox,
                last_seen_frame=frame,
                last_record_time=record_time,
            )
            self._next_id += 1
            track.observe(frame, record_time, det)
            self.active.append(track)
            assignments.append((track.local_id, det))
        self.active = [t for t in self.active if frame - t.last_seen_frame <= self.max_age]
        assignments.sort(key=lambda a: a[0])
        return assignments


def associate_tracks(tracker: Tracker, dets: list[Detection], frame: int,
                     record_time: int = 0) -> list[tuple[int, Detection]]:
    return tracker.step(dets, frame, record_time)


class EdgePipeline:
    """One camera's full edge lane: filter, track, batch by time window."""

    def __init__(self, camera_id: str, conf_floor: float = DEFAULT_CONF_FLOOR,
                 iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                 max_age: int = DEFAULT_MAX_AGE,
                 window_ms: int = DEFAULT_WINDOW_MS):
        self.camera_id = camera_id
        self.conf_floor = conf_floor
        self.window_ms = window_ms
        self.tracker = Tracker(camera_id, iou_threshold, max_age)
        self._window_start: Optional[int] = None
        self._window_tracks: dict[int, Tracklet] = {}
        self._window_scores: list[tuple[int, float]] = []
        self._window_actions: list[str] = []
        self._window_objects: list[str] = []

    def _window_of(self, ts_ms: int) -> int:
        return (ts_ms // self.window_ms) * self.window_ms

    def process(self, obs: FrameObservation) -> list[LocalBatch]:
        """Feed one frame; returns any batches whose window just closed."""
        if obs.camera_id != self.camera_id:
            raise ValidationError(f"observation for {obs.camera_id} fed to lane {self.camera_id}")
        out: list[LocalBatch] = []
        w = self._window_of(obs.record_time)
        if self._window_start is None:
            self._window_start = w
        elif w > self._window_start:
            out.append(self._close_window())
            self._window_start = w
        dets = filter_pedestrians(obs, self.conf_floor)
        assigned = self.tracker.step(dets, obs.frame_index, obs.record_time)
        by_id = {t.local_id: t for t in self.tracker.active}
        for local_id, _ in assigned:
            self._window_tracks[local_id] = by_id[local_id]
        self._window_scores.append((obs.record_time, obs.frame_anomaly_score))
        self._window_actions.extend(a for a in obs.actions if a not in self._window_actions)
        self._window_objects.extend(o for o in obs.objects if o not in self._window_objects)
        return out

    def _close_window(self) -> LocalBatch:
        assert self._window_start is not None
        entries = []
        for local_id in sorted(self._window_tracks):
            track = self._window_tracks[local_id]
            best = select_best_representation(track)
            entries.append(
                BatchEntry(
                    local_id=local_id,
                    best=best,
                    feature=best.feature,
                    record_time=track.last_record_time,
                    bbox_tlwh=track.last_bbox,
                )
            )
        batch = LocalBatch(
            camera_id=self.camera_id,
            window_start=self._window_start,
            window_end=self._window_start + self.window_ms,
            entries=tuple(entries),
            frame_anomaly_scores=tuple(self._window_scores),
            actions=tuple(self._window_actions),
            objects=tuple(self._window_objects),
        )
        self._window_tracks = {}
        self._window_scores = []
        self._window_actions = []
        self._window_objects = []
        return batch

    def flush(self) -> list[LocalBatch]:
        """Close the in-flight window at end of trace."""
        if self._window_start is None or (not self._window_scores and not self._window_tracks):
            return []
        return [self._close_window()]


def emit_local_batch(pipeline: EdgePipeline) -> list[LocalBatch]:
    return pipeline.flush()
