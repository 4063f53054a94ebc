"""Synthetic scenario generation: simulated walkers standing in for live
cameras plus the detector stack, written out in the trace format the edge
pipeline ingests.

Generation is fully deterministic given the seed; the same config produces
byte-identical trace files.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .model import CameraConfig, POSE_KEYPOINTS

IMAGE_W = 1920
IMAGE_H = 1080
MAX_PEOPLE_PER_CAMERA_FRAME = 200


class ScenarioConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalyInjection:
    time_s: float
    kind: str  # "Behavioral" | "Statistical"
    category: str
    score: float  # frame score for Behavioral, extra-walker count for Statistical
    duration_s: float = 1.0


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration_s: float = 60.0
    fps: float = 30.0
    target_density: float = 70.0  # person detections per second, all cameras
    cameras: list[CameraConfig] = field(default_factory=list)
    anomaly_injections: list[AnomalyInjection] = field(default_factory=list)
    walker_speed: float = 4.0  # pixels per frame
    despawn_rate: float = 0.005  # per-walker per-frame probability
    feature_dim: int = 64
    feature_noise: float = 0.05
    start_ms: int = 1_700_000_000_000

    def __post_init__(self):
        if self.fps <= 0:
            raise ScenarioConfigError("fps must be > 0")
        if self.target_density < 0:
            raise ScenarioConfigError("target_density must be >= 0")
        if not self.cameras:
            self.cameras = [default_camera("cam-1", "loc-1")]
        per_cam = self.target_density / self.fps / len(self.cameras)
        if per_cam > MAX_PEOPLE_PER_CAMERA_FRAME:
            raise ScenarioConfigError(
                f"density {self.target_density}/s at {self.fps} fps needs "
                f"{per_cam:.0f} people per camera frame (max {MAX_PEOPLE_PER_CAMERA_FRAME})"
            )
        for inj in self.anomaly_injections:
            if not 0 <= inj.time_s <= self.duration_s:
                raise ScenarioConfigError(f"injection at {inj.time_s}s outside run duration")


def default_camera(camera_id: str, location_id: str, live: bool = True) -> CameraConfig:
    # plain scaling homography: image plane -> 100x100 BEV units
    return CameraConfig(
        camera_id=camera_id,
        location_id=location_id,
        display_name=camera_id,
        homography=(100.0 / IMAGE_W, 0.0, 0.0, 0.0, 100.0 / IMAGE_H, 0.0, 0.0, 0.0, 1.0),
        bev_extent=(0.0, 0.0, 100.0, 100.0),
        live=live,
    )


def load_scenario_config(text: str) -> ScenarioConfig:
    import tomli

    from .model import load_camera_configs

    doc = tomli.loads(text)
    sc = doc.get("scenario", {})
    cameras = load_camera_configs(text)
    injections = [
        AnomalyInjection(
            time_s=float(e["time_s"]),
            kind=str(e["kind"]),
            category=str(e.get("category", "")),
            score=float(e["score"]),
            duration_s=float(e.get("duration_s", 1.0)),
        )
        for e in doc.get("injections", [])
    ]
    return ScenarioConfig(
        seed=int(sc.get("seed", 0)),
        duration_s=float(sc.get("duration_s", 60.0)),
        fps=float(sc.get("fps", 30.0)),
        target_density=float(sc.get("target_density", 70.0)),
        cameras=cameras,
        anomaly_injections=injections,
        walker_speed=float(sc.get("walker_speed", 4.0)),
        despawn_rate=float(sc.get("despawn_rate", 0.005)),
        feature_dim=int(sc.get("feature_dim", 64)),
        feature_noise=float(sc.get("feature_noise", 0.05)),
        start_ms=int(sc.get("start_ms", 1_700_000_000_000)),
    )


class _Walker:
    __slots__ = ("identity", "x", "y", "vx", "vy", "w", "h", "feature")

    def __init__(self, identity: int, rng: np.random.Generator, speed: float, dim: int):
        self.identity = identity
        self.w = float(rng.uniform(40, 90))
        self.h = float(rng.uniform(140, 200))
        self.x = float(rng.uniform(self.w, IMAGE_W - self.w))  # foot-point x
        self.y = float(rng.uniform(self.h + 10, IMAGE_H - 5))  # foot-point y
        angle = float(rng.uniform(0, 2 * math.pi))
        self.vx = speed * math.cos(angle)
        self.vy = speed * math.sin(angle)
        v = rng.standard_normal(dim)
        self.feature = v / np.linalg.norm(v)

    def step(self):
        self.x += self.vx
        self.y += self.vy
        if self.x < self.w / 2 or self.x > IMAGE_W - self.w / 2:
            self.vx = -self.vx
            self.x = min(max(self.x, self.w / 2), IMAGE_W - self.w / 2)
        if self.y < self.h or self.y > IMAGE_H - 1:
            self.vy = -self.vy
            self.y = min(max(self.y, self.h), IMAGE_H - 1)

    def bbox(self) -> list[float]:
        return [round(self.x - self.w / 2, 2), round(self.y - self.h, 2),
                round(self.w, 2), round(self.h, 2)]


def _pose(rng: np.random.Generator, bbox: list[float]) -> list[list[float]]:
    x, y, w, h = bbox
    kps = []
    for _ in range(POSE_KEYPOINTS):
        kx = round(float(x + rng.uniform(0.2, 0.8) * w), 2)
        ky = round(float(y + rng.uniform(0.05, 0.95) * h), 2)
        kc = round(float(rng.uniform(0.5, 1.0)), 3)
        kps.append([kx, ky, kc])
    return kps


def generate_scenario(cfg: ScenarioConfig, out: IO[str]) -> dict:
    """Write a trace file for the scenario; returns generation summary stats."""
    rng = np.random.default_rng(cfg.seed)
    n_frames = int(round(cfg.duration_s * cfg.fps))
    per_cam_target = cfg.target_density / cfg.fps / len(cfg.cameras)
    next_identity = 1
    total_detections = 0

    class _Lane:
        def __init__(self):
            self.walkers: list[_Walker] = []
            self.dither = 0.0

    lanes = {c.camera_id: _Lane() for c in cfg.cameras}

    for frame in range(n_frames):
        t_s = frame / cfg.fps
        ts_ms = cfg.start_ms + int(round(frame * 1000.0 / cfg.fps))
        frame_score = round(float(rng.uniform(0, 15)), 2)
        actions: list[str] = []
        extra_people = 0
        for inj in cfg.anomaly_injections:
            if inj.time_s <= t_s < inj.time_s + inj.duration_s:
                if inj.kind == "Behavioral":
                    frame_score = inj.score
                    if inj.category:
                        actions.append(inj.category)
                else:
                    extra_people += int(inj.score)
        for cam in cfg.cameras:
            lane = lanes[cam.camera_id]
            # despawn, then top population back up to the dithered target
            lane.walkers = [w for w in lane.walkers
                            if rng.random() >= cfg.despawn_rate]
            lane.dither += per_cam_target
            target = int(lane.dither)
            lane.dither -= target
            target += extra_people
            while len(lane.walkers) < target:
                lane.walkers.append(_Walker(next_identity, rng, cfg.walker_speed,
                                            cfg.feature_dim))
                next_identity += 1
            while len(lane.walkers) > target:
                lane.walkers.pop()
            detections = []
            for w in lane.walkers:
                w.step()
                bbox = w.bbox()
                noise = rng.standard_normal(cfg.feature_dim) * cfg.feature_noise
                f = w.feature + noise
                f = f / np.linalg.norm(f)
                detections.append({
                    "class": "person",
                    "conf": round(float(rng.uniform(0.6, 0.99)), 3),
                    "tlwh": bbox,
                    "pose": _pose(rng, bbox),
                    "feature": [round(float(v), 5) for v in f],
                })
            total_detections += len(detections)
            record = {
                "frame": frame,
                "ts_ms": ts_ms,
                "camera_id": cam.camera_id,
                "detections": detections,
                "frame_anomaly_score": frame_score,
                "actions": actions,
                "objects": [],
            }
            out.write(json.dumps(record, separators=(",", ":")) + "\n")
    return {
        "frames_per_camera": n_frames,
        "cameras": len(cfg.cameras),
        "total_detections": total_detections,
        "mean_detections_per_s": total_detections / cfg.duration_s if cfg.duration_s else 0.0,
        "target_density": cfg.target_density,
    }
