"""End-to-end orchestration: trace -> edge lanes -> global node -> analytics
-> gateway -> KV store, plus the benchmark harness.

Batches flow to the single global consumer in trace order, so a replay with
the same seed and config produces a byte-identical record store.
"""
from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional

from . import analytics
from .analytics import HeatmapGrid, Indicator, OccupancyTracker, bev_project
from .edge import EdgePipeline, LocalBatch, ingest_trace
from .gateway import Gateway, GatewayRule, Notification, load_rules
from .globalnode import (
    DEFAULT_BEHAVIOR_THRESHOLD,
    DEFAULT_EPOCH_MS,
    DEFAULT_SIM_THRESHOLD,
    RecordStore,
    ReIdState,
    process_batch,
)
from .kvstore import KVStore, TABLE_ANALYTICS, TABLE_ANOMALIES, TABLE_COUNTS
from .model import AnomalyKind, CameraConfig

# Reference points from the source system's evaluation; environment-specific,
# reported beside measured numbers for comparison only.
REFERENCE_NUMBERS = {
    "densities": {"70": {"throughput_fps": 52.94, "latency_s": 5.39},
                  "216": {"throughput_fps": 40.16, "latency_s": 15.66},
                  "744": {"throughput_fps": 17.80, "latency_s": 36.04}},
    "cloud": {"store_ms": 41.4, "query_layer_ms": 96.3, "app_layer_s": 0.06},
    "end_to_end_s": 36.1,
}

DEFAULT_RULES_TOML = """\
[[rules]]
name = "counts-store"
topic_filter = "counts/+"
select = "SELECT count FROM 'counts/+'"
action = { type = "write_table", table = "counts" }

[[rules]]
name = "analytics-store"
topic_filter = "analytics/+"
select = "SELECT * FROM 'analytics/+'"
action = { type = "write_table", table = "analytics" }

[[rules]]
name = "anomaly-store"
topic_filter = "anomaly/+"
select = "SELECT kind, category, camera_id, record_time, value, message FROM 'anomaly/+'"
action = { type = "write_table", table = "anomalies" }

[[rules]]
name = "anomaly-notify"
topic_filter = "anomaly/+"
select = "SELECT * FROM 'anomaly/+'"
action = { type = "notify", title = "Anomaly on {camera_id}" }
"""


@dataclass
class RunConfig:
    cameras: list[CameraConfig]
    rules: list[GatewayRule]
    seed: int = 0
    feature_dim: int = 64
    sim_threshold: float = DEFAULT_SIM_THRESHOLD
    behavior_threshold: float = DEFAULT_BEHAVIOR_THRESHOLD
    epoch_ms: int = DEFAULT_EPOCH_MS
    bucket_ms: int = 1000
    heatmap_cols: int = 32
    heatmap_rows: int = 32


@dataclass
class RunArtifacts:
    records: RecordStore
    store: KVStore
    gateway: Gateway
    heatmaps: dict[str, HeatmapGrid]
    notifications: list[Notification]
    report: dict


def default_rules() -> list[GatewayRule]:
    return load_rules(DEFAULT_RULES_TOML)


class PipelineRunner:
    def __init__(self, cfg: RunConfig, record_sink: Optional[IO[str]] = None):
        self.cfg = cfg
        self.records = RecordStore(record_sink)
        self.store = KVStore([TABLE_COUNTS, TABLE_ANALYTICS, TABLE_ANOMALIES])
        self.notifications: list[Notification] = []
        self.gateway = Gateway(cfg.rules, self.store,
                               on_notification=self.notifications.append)
        self.state: Optional[ReIdState] = None
        self.lanes = {c.camera_id: EdgePipeline(c.camera_id, window_ms=cfg.bucket_ms)
                      for c in cfg.cameras}
        self.occupancy = {c.camera_id: OccupancyTracker(c.camera_id, cfg.bucket_ms)
                          for c in cfg.cameras}
        self.heatmaps = {
            c.camera_id: HeatmapGrid(c.camera_id, cfg.heatmap_cols, cfg.heatmap_rows,
                                     c.bev_extent)
            for c in cfg.cameras
        }
        self._homographies = {c.camera_id: c.homography for c in cfg.cameras}
        self._heatmap_version = {c.camera_id: 0 for c in cfg.cameras}
        # latency accounting: arrival wall time per (camera, record_time bucket)
        self._arrivals: dict[tuple[str, int], float] = {}
        self._frame_latencies: list[float] = []
        self.frames = 0

    def run(self, trace: IO) -> dict:
        wall_start = time.perf_counter()
        for obs in ingest_trace(trace):
            lane = self.lanes.get(obs.camera_id)
            if lane is None:
                raise ValueError(f"trace references unregistered camera {obs.camera_id}")
            self.frames += 1
            arrival = time.perf_counter()
            bucket = (obs.record_time // self.cfg.bucket_ms) * self.cfg.bucket_ms
            self._arrivals.setdefault((obs.camera_id, bucket), arrival)
            for batch in lane.process(obs):
                self._consume(batch)
        for lane in self.lanes.values():
            for batch in lane.flush():
                self._consume(batch)
        wall = time.perf_counter() - wall_start
        report = {
            "frames": self.frames,
            "wall_s": wall,
            "throughput_fps": self.frames / wall if wall > 0 else 0.0,
            "latency_s_mean": (sum(self._frame_latencies) / len(self._frame_latencies)
                               if self._frame_latencies else 0.0),
            "latency_s_max": max(self._frame_latencies, default=0.0),
            "records": len(self.records),
            "gateway": {
                "messages": self.gateway.stats.messages,
                "mean_latency_ms": self.gateway.stats.mean_latency_ms,
                "table_writes": self.gateway.stats.table_writes,
                "notifications": self.gateway.stats.notifications,
                "rule_errors": self.gateway.stats.rule_errors,
            },
        }
        return report

    def _consume(self, batch: LocalBatch) -> None:
        if self.state is None:
            self.state = ReIdState.fresh(self.cfg.feature_dim, batch.window_start,
                                         seed=self.cfg.seed, epoch_ms=self.cfg.epoch_ms)
        result = process_batch(batch, self.state, self.records,
                               self.cfg.sim_threshold, self.cfg.behavior_threshold)
        persist_wall = time.perf_counter()
        arrival = self._arrivals.pop((batch.camera_id, batch.window_start), None)
        if arrival is not None:
            self._frame_latencies.append(persist_wall - arrival)

        cam = batch.camera_id
        count = len({r.global_id for r in result.records})
        tracker = self.occupancy[cam]
        stats = tracker.hour_stats(batch.window_start)
        indicator = analytics.occupancy_indicator(count, stats)
        base = tracker.baseline()
        is_statistical = tracker.observe(batch.window_start, count)

        bev_points = []
        h = self._homographies[cam]
        for r in result.records:
            try:
                bev_points.append(list(bev_project(r.bbox_tlwh.foot_point(), h)))
            except analytics.HorizonError:
                continue
        analytics.heatmap_accumulate([tuple(p) for p in bev_points], self.heatmaps[cam])
        if bev_points:
            self._heatmap_version[cam] += 1

        self.gateway.publish(f"counts/{cam}", {
            "camera_id": cam, "ts_ms": batch.window_start, "count": count,
        })
        mean, std = base if base is not None else (0.0, 0.0)
        self.gateway.publish(f"analytics/{cam}", {
            "camera_id": cam,
            "ts_ms": batch.window_start,
            "count": count,
            "indicator": indicator.value,
            "mean": mean,
            "std": std,
            "statistical_anomaly": is_statistical,
            "heatmap_version": self._heatmap_version[cam],
            "bev_points": [[round(x, 4), round(y, 4)] for x, y in bev_points],
        })
        for ev in result.events:
            self.gateway.publish(f"anomaly/{cam}", {
                "camera_id": cam, "ts_ms": ev.record_time, **ev.to_doc(),
            })
        if is_statistical:
            self.gateway.publish(f"anomaly/{cam}", {
                "camera_id": cam,
                "ts_ms": batch.window_start,
                "kind": AnomalyKind.STATISTICAL.value,
                "category": "",
                "record_time": batch.window_start,
                "value": count,
                "message": f"statistical anomaly: count {count} above historical "
                           f"mean {mean:.2f} + 2*std {std:.2f} on {cam}",
            })

    def artifacts(self, report: dict) -> RunArtifacts:
        return RunArtifacts(
            records=self.records,
            store=self.store,
            gateway=self.gateway,
            heatmaps=self.heatmaps,
            notifications=self.notifications,
            report=report,
        )


def run_pipeline(trace: IO, cfg: RunConfig,
                 record_sink: Optional[IO[str]] = None) -> RunArtifacts:
    runner = PipelineRunner(cfg, record_sink)
    report = runner.run(trace)
    return runner.artifacts(report)


def save_artifacts(artifacts: RunArtifacts, outdir: Path) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "records.jsonl", "w") as f:
        for r in artifacts.records.rows():
            f.write(r.to_json() + "\n")
    artifacts.store.save(outdir / "tables")
    with open(outdir / "heatmaps.json", "w") as f:
        json.dump({cam: g.export() for cam, g in artifacts.heatmaps.items()}, f, indent=1)
    with open(outdir / "notifications.jsonl", "w") as f:
        for n in artifacts.notifications:
            f.write(json.dumps(n.to_doc(), separators=(",", ":"), sort_keys=True) + "\n")
    with open(outdir / "report.json", "w") as f:
        json.dump(artifacts.report, f, indent=1)


def measure_api_latency(artifacts: RunArtifacts, cameras: list[CameraConfig],
                        samples: int = 50) -> float:
    """Mean latency (ms) of representative API queries served in-process."""
    from fastapi.testclient import TestClient

    from .api import ApiState, create_app

    state = ApiState(cameras=cameras, store=artifacts.store,
                     heatmaps={c: g.export() for c, g in artifacts.heatmaps.items()})
    state.add_user("bench@example.com", "bench")
    app = create_app(state)
    with TestClient(app) as client:
        token = client.post("/login", json={"email": "bench@example.com",
                                            "password": "bench"}).json()["token"]
        headers = {"Authorization": f"Bearer {token}"}
        cam = cameras[0].camera_id
        start = time.perf_counter()
        for _ in range(samples):
            client.get(f"/cameras/{cam}/status", headers=headers)
        elapsed = time.perf_counter() - start
    return 1000.0 * elapsed / samples


def run_bench(densities: list[float], duration_s: float, seed: int = 0,
              fps: float = 30.0, feature_dim: int = 64) -> dict:
    """Benchmark the full pipeline at several crowd densities."""
    import io

    from .scenario import ScenarioConfig, default_camera, generate_scenario

    cameras = [default_camera("cam-1", "loc-1")]
    per_density = {}
    last_artifacts = None
    for density in densities:
        sc = ScenarioConfig(seed=seed, duration_s=duration_s, fps=fps,
                            target_density=density, cameras=cameras,
                            feature_dim=feature_dim)
        buf = io.StringIO()
        gen = generate_scenario(sc, buf)
        buf.seek(0)
        cfg = RunConfig(cameras=cameras, rules=default_rules(), seed=seed,
                        feature_dim=feature_dim)
        artifacts = run_pipeline(buf, cfg)
        last_artifacts = artifacts
        per_density[str(int(density))] = {
            "throughput_fps": artifacts.report["throughput_fps"],
            "latency_s_mean": artifacts.report["latency_s_mean"],
            "latency_s_max": artifacts.report["latency_s_max"],
            "frames": artifacts.report["frames"],
            "detections": gen["total_detections"],
            "gateway_mean_latency_ms": artifacts.report["gateway"]["mean_latency_ms"],
        }
    gateway_ms = last_artifacts.report["gateway"]["mean_latency_ms"]
    store_ms = _measure_store_latency(last_artifacts.store)
    api_ms = measure_api_latency(last_artifacts, cameras)
    max_density = str(int(max(densities)))
    end_to_end_s = (per_density[max_density]["latency_s_mean"]
                    + (gateway_ms + store_ms + api_ms) / 1000.0)
    return {
        "hardware": f"{platform.processor() or platform.machine()} / "
                    f"python {platform.python_version()}",
        "densities": per_density,
        "cloud": {"gateway_ms": gateway_ms, "store_ms": store_ms, "api_ms": api_ms},
        "end_to_end_s": end_to_end_s,
        "reference": REFERENCE_NUMBERS,
    }


def _measure_store_latency(store: KVStore, samples: int = 200) -> float:
    from .kvstore import StoreKey

    store.create_table("bench_probe")
    start = time.perf_counter()
    for i in range(samples):
        store.put("bench_probe", StoreKey("probe", i), {"v": i})
        store.get("bench_probe", StoreKey("probe", i))
    return 1000.0 * (time.perf_counter() - start) / samples


def format_bench_report(report: dict) -> str:
    lines = []
    lines.append(f"hardware: {report['hardware']}")
    lines.append(f"{'density':>10} {'measured fps':>14} {'ref fps':>10} "
                 f"{'measured lat(s)':>16} {'ref lat(s)':>11}")
    for density, row in report["densities"].items():
        ref = report["reference"]["densities"].get(density, {})
        lines.append(
            f"{density:>10} {row['throughput_fps']:>14.2f} "
            f"{ref.get('throughput_fps', float('nan')):>10.2f} "
            f"{row['latency_s_mean']:>16.4f} {ref.get('latency_s', float('nan')):>11.2f}"
        )
    cloud = report["cloud"]
    ref_cloud = report["reference"]["cloud"]
    lines.append(
        f"cloud path: gateway {cloud['gateway_ms']:.3f} ms, "
        f"store {cloud['store_ms']:.3f} ms (ref {ref_cloud['store_ms']} ms), "
        f"api {cloud['api_ms']:.3f} ms (ref query layer {ref_cloud['query_layer_ms']} ms, "
        f"app layer {ref_cloud['app_layer_s']} s)"
    )
    lines.append(f"end-to-end: {report['end_to_end_s']:.4f} s "
                 f"(ref {report['reference']['end_to_end_s']} s)")
    return "\n".join(lines)
