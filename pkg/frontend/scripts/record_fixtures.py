"""Record live API responses into test/fixtures/ so the dashboard's contract
tests run against real payloads without the backend present."""
import io
import json
from pathlib import Path

from fastapi.testclient import TestClient

from svs.api import ApiState, create_app
from svs.runner import RunConfig, default_rules, run_pipeline
from svs.scenario import AnomalyInjection, ScenarioConfig, default_camera, generate_scenario

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"
START_MS = 1_700_000_000_000


def main() -> None:
    cams = [default_camera("cam-1", "loc-1"), default_camera("cam-2", "loc-1")]
    inj = AnomalyInjection(time_s=5.0, kind="Behavioral", category="violence",
                          score=95.0, duration_s=2.0)
    sc = ScenarioConfig(seed=17, duration_s=20.0, fps=10, target_density=25,
                        cameras=cams, anomaly_injections=[inj], feature_dim=32)
    buf = io.StringIO()
    generate_scenario(sc, buf)
    buf.seek(0)
    artifacts = run_pipeline(buf, RunConfig(cameras=cams, rules=default_rules(),
                                            seed=17, feature_dim=32))

    state = ApiState(cameras=cams, store=artifacts.store,
                     heatmaps={c: g.export() for c, g in artifacts.heatmaps.items()})
    for note in artifacts.notifications:
        state.broadcaster.emit(note)
    state.add_user("operator@example.com", "secret", "Olive", "Operator")
    client = TestClient(create_app(state))

    login = client.post("/login", json={"email": "operator@example.com",
                                        "password": "secret"}).json()
    auth = {"Authorization": f"Bearer {login['token']}"}
    now = START_MS + 30_000

    fixtures = {
        "login": login,
        "locations": client.get("/locations", headers=auth).json(),
        "cameras": client.get("/locations/loc-1/cameras", headers=auth).json(),
        "status": client.get("/cameras/cam-1/status", headers=auth).json(),
        "anomalies": client.get("/cameras/cam-1/anomalies",
                                params={"now_ms": now}, headers=auth).json(),
        "heatmap": client.get("/cameras/cam-1/heatmap", headers=auth).json(),
        "bev": client.get("/cameras/cam-1/bev", headers=auth).json(),
        "search": client.get("/cameras/cam-1/search",
                             params={"from": START_MS, "to": now},
                             headers=auth).json(),
        "search_empty": client.get("/cameras/cam-1/search",
                                   params={"from": 0, "to": 1000},
                                   headers=auth).json(),
    }
    notifications = []
    if artifacts.notifications:
        with client.stream("GET", "/events", headers=auth,
                           params={"limit": len(artifacts.notifications)}) as resp:
            for line in resp.iter_lines():
                if line.startswith("data: "):
                    notifications.append(json.loads(line[6:]))
    fixtures["notifications"] = notifications

    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in fixtures.items():
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {name}.json")


if __name__ == "__main__":
    main()
