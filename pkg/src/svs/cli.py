"""Command-line entry points: generate, run, bench, serve, eval-auc."""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .metrics import auc_roc
from .model import load_camera_configs
from .runner import (
    DEFAULT_RULES_TOML,
    RunConfig,
    default_rules,
    format_bench_report,
    run_bench,
    run_pipeline,
    save_artifacts,
)
from .scenario import generate_scenario, load_scenario_config


@click.group()
def main():
    """Privacy-preserving surveillance analytics pipeline."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="Scenario TOML ([scenario] table, [[cameras]], [[injections]]).")
@click.option("--out", "out_path", type=click.Path(), required=True)
def generate(config_path, out_path):
    """Generate a synthetic detector trace."""
    cfg = load_scenario_config(Path(config_path).read_text())
    with open(out_path, "w") as f:
        summary = generate_scenario(cfg, f)
    click.echo(json.dumps(summary, indent=1))


@main.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--cameras", "cameras_path", type=click.Path(exists=True), required=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              help="Gateway rule TOML; defaults to the built-in rule set.")
@click.option("--out", "out_dir", type=click.Path(), default="run-artifacts")
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--feature-dim", type=int, default=64)
def run(trace_path, cameras_path, rules_path, out_dir, report_path, seed, feature_dim):
    """Run the full pipeline over a trace and save run artifacts."""
    from .gateway import load_rules

    cameras = load_camera_configs(Path(cameras_path).read_text())
    rules = (load_rules(Path(rules_path).read_text()) if rules_path
             else default_rules())
    cfg = RunConfig(cameras=cameras, rules=rules, seed=seed, feature_dim=feature_dim)
    with open(trace_path) as trace:
        artifacts = run_pipeline(trace, cfg)
    save_artifacts(artifacts, Path(out_dir))
    if report_path:
        Path(report_path).write_text(json.dumps(artifacts.report, indent=1))
    click.echo(json.dumps(artifacts.report, indent=1))


@main.command()
@click.option("--densities", default="70,216,744", show_default=True,
              help="Comma-separated detections-per-second targets.")
@click.option("--duration", type=float, default=60.0, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--report", "report_path", type=click.Path(), default=None)
def bench(densities, duration, seed, report_path):
    """Benchmark throughput/latency across crowd densities."""
    dens = [float(d) for d in densities.split(",")]
    report = run_bench(dens, duration, seed=seed)
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=1))
    click.echo(format_bench_report(report))


@main.command("eval-auc")
@click.option("--scores", "scores_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
def eval_auc(scores_path, labels_path):
    """AUC-ROC from one-column CSV files of scores and {0,1} labels."""
    scores = _read_column(scores_path, float)
    labels = _read_column(labels_path, lambda v: int(float(v)))
    click.echo(f"{auc_roc(scores, labels):.6f}")


def _read_column(path, conv):
    out = []
    with open(path) as f:
        for row in csv.reader(f):
            if not row or row[0].strip().lower() in ("score", "label", "value"):
                continue
            out.append(conv(row[0]))
    return out


@main.command()
@click.option("--artifacts", "artifacts_dir", type=click.Path(exists=True), required=True,
              help="Directory written by `svs run`.")
@click.option("--cameras", "cameras_path", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--user", "user_email", default="admin@example.com", show_default=True)
@click.option("--password", default="admin", show_default=True)
def serve(artifacts_dir, cameras_path, host, port, user_email, password):
    """Serve the query/push API over saved run artifacts."""
    import uvicorn

    from .api import ApiState, create_app
    from .gateway import Notification
    from .kvstore import KVStore

    cameras = load_camera_configs(Path(cameras_path).read_text())
    store = KVStore.load(Path(artifacts_dir) / "tables")
    heatmaps = {}
    hm_path = Path(artifacts_dir) / "heatmaps.json"
    if hm_path.exists():
        heatmaps = json.loads(hm_path.read_text())
    state = ApiState(cameras=cameras, store=store, heatmaps=heatmaps)
    state.add_user(user_email, password)
    notes_path = Path(artifacts_dir) / "notifications.jsonl"
    if notes_path.exists():
        for line in notes_path.read_text().splitlines():
            doc = json.loads(line)
            state.broadcaster.emit(Notification(
                event_id=doc["event_id"], title=doc["title"], message=doc["message"],
                ts_ms=doc["ts_ms"], camera_id=doc["camera_id"]))
    app = create_app(state)
    click.echo(f"login with {user_email} / {password}")
    uvicorn.run(app, host=host, port=port)


@main.command("init-rules")
@click.option("--out", "out_path", type=click.Path(), default="rules.toml")
def init_rules(out_path):
    """Write the built-in gateway rule set to a TOML file."""
    Path(out_path).write_text(DEFAULT_RULES_TOML)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
