import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from svs.api import ApiState, create_app
from svs.gateway import Notification
from svs.kvstore import KVStore, StoreKey, TABLE_ANALYTICS, TABLE_ANOMALIES, TABLE_COUNTS
from svs.model import CameraConfig

IDENTITY_H = (1.0, 0, 0, 0, 1.0, 0, 0, 0, 1.0)


def camera(camera_id="cam-1", location="lobby", live=True):
    return CameraConfig(camera_id, location, camera_id.title(), IDENTITY_H,
                        (0, 0, 100, 100), live)


@pytest.fixture
def state():
    store = KVStore([TABLE_COUNTS, TABLE_ANALYTICS, TABLE_ANOMALIES])
    s = ApiState(cameras=[camera("cam-1"), camera("cam-2"),
                          camera("cam-3", location="garage", live=False)],
                 store=store)
    s.add_user("user@example.com", "pw", "Ada", "L")
    return s


@pytest.fixture
def client(state):
    return TestClient(create_app(state))


@pytest.fixture
def auth(client):
    token = client.post("/login", json={"email": "user@example.com",
                                        "password": "pw"}).json()["token"]
    return {"Authorization": f"Bearer {token}"}


class TestAuth:
    def test_login_ok(self, client):
        resp = client.post("/login", json={"email": "user@example.com", "password": "pw"})
        assert resp.status_code == 200
        assert resp.json()["first_name"] == "Ada"

    def test_login_bad_password(self, client):
        resp = client.post("/login", json={"email": "user@example.com", "password": "x"})
        assert resp.status_code == 401

    def test_data_endpoints_require_auth(self, client):
        for path in ("/locations", "/cameras/cam-1/status", "/events"):
            assert client.get(path).status_code == 401

    def test_bad_token_rejected(self, client):
        resp = client.get("/locations", headers={"Authorization": "Bearer nope"})
        assert resp.status_code == 401


class TestListings:
    def test_locations_grouped(self, client, auth):
        locs = client.get("/locations", headers=auth).json()["locations"]
        assert locs == [{"location_id": "garage", "camera_count": 1},
                        {"location_id": "lobby", "camera_count": 2}]

    def test_cameras_with_live_flags(self, client, auth):
        cams = client.get("/locations/garage/cameras", headers=auth).json()["cameras"]
        assert cams == [{"camera_id": "cam-3", "display_name": "Cam-3", "live": False}]

    def test_unknown_location(self, client, auth):
        assert client.get("/locations/nowhere/cameras", headers=auth).status_code == 404


class TestStatus:
    def test_empty_status_is_not_zero(self, client, auth):
        resp = client.get("/cameras/cam-1/status", headers=auth).json()
        assert resp.get("empty") is True
        assert "count" not in resp

    def test_latest_row_served(self, state, client, auth):
        state.store.put(TABLE_COUNTS, StoreKey("cam-1", 1000), {"count": 3})
        state.store.put(TABLE_COUNTS, StoreKey("cam-1", 2000), {"count": 7})
        state.store.put(TABLE_ANALYTICS, StoreKey("cam-1", 2000),
                        {"indicator": "Normal"})
        resp = client.get("/cameras/cam-1/status", headers=auth).json()
        assert resp == {"camera_id": "cam-1", "count": 7, "ts_ms": 2000,
                        "indicator": "Normal"}

    def test_unknown_camera(self, client, auth):
        assert client.get("/cameras/ghost/status", headers=auth).status_code == 404


class TestAnomalies:
    def put_event(self, state, ts, cam="cam-1"):
        state.store.put(TABLE_ANOMALIES, StoreKey(cam, ts), {
            "kind": "Behavioral", "category": "violence", "camera_id": cam,
            "record_time": ts, "value": 90.0, "message": "m"})

    def test_window_filter(self, state, client, auth):
        now = 100 * 3600 * 1000
        self.put_event(state, now - 3600 * 1000)       # 1h ago: in
        self.put_event(state, now - 25 * 3600 * 1000)  # 25h ago: out
        events = client.get("/cameras/cam-1/anomalies",
                            params={"now_ms": now}, headers=auth).json()["events"]
        assert len(events) == 1
        assert events[0]["record_time"] == now - 3600 * 1000

    def test_newest_first(self, state, client, auth):
        now = 100 * 3600 * 1000
        self.put_event(state, now - 3000)
        self.put_event(state, now - 1000)
        events = client.get("/cameras/cam-1/anomalies",
                            params={"now_ms": now}, headers=auth).json()["events"]
        assert [e["record_time"] for e in events] == [now - 1000, now - 3000]

    def test_response_schema_allowlist(self, state, client, auth):
        now = 100 * 3600 * 1000
        state.store.put(TABLE_ANOMALIES, StoreKey("cam-1", now - 10), {
            "kind": "Behavioral", "category": "", "camera_id": "cam-1",
            "record_time": now - 10, "value": 1.0, "message": "m",
            "internal_debug": "leak"})
        [event] = client.get("/cameras/cam-1/anomalies",
                             params={"now_ms": now}, headers=auth).json()["events"]
        assert "internal_debug" not in event


class TestSearch:
    def test_delegates_to_aggregates(self, state, client, auth):
        for i, c in enumerate([3, 5, 7, 5]):
            state.store.put(TABLE_COUNTS, StoreKey("cam-1", i * 1000), {"count": c})
        resp = client.get("/cameras/cam-1/search",
                          params={"from": 0, "to": 10_000}, headers=auth).json()
        assert resp == {"total": 20, "average": 5.0, "max": 7, "min": 3,
                        "most_frequent": 5}

    def test_empty_window(self, client, auth):
        resp = client.get("/cameras/cam-1/search",
                          params={"from": 0, "to": 10}, headers=auth).json()
        assert resp == {"empty": True}

    def test_inverted_window(self, client, auth):
        resp = client.get("/cameras/cam-1/search",
                          params={"from": 10, "to": 5}, headers=auth)
        assert resp.status_code == 422


class TestHeatmapBev:
    def test_heatmap_export(self, state, client, auth):
        state.heatmaps["cam-1"] = {"cols": 2, "rows": 2, "extent": [0, 0, 10, 10],
                                   "cells": [1, 0, 0, 2]}
        resp = client.get("/cameras/cam-1/heatmap", headers=auth).json()
        assert resp["cells"] == [1, 0, 0, 2]
        assert len(resp["cells"]) == resp["cols"] * resp["rows"]

    def test_heatmap_empty(self, client, auth):
        resp = client.get("/cameras/cam-1/heatmap", headers=auth).json()
        assert resp["cells"] == []

    def test_bev_latest(self, state, client, auth):
        for ts, pts in [(1000, [[1, 1]]), (2000, [[2, 2], [3, 3]])]:
            state.store.put(TABLE_ANALYTICS, StoreKey("cam-1", ts),
                            {"bev_points": pts})
        resp = client.get("/cameras/cam-1/bev", headers=auth).json()
        assert resp["bev_points"] == [[2, 2], [3, 3]]

    def test_bev_empty(self, client, auth):
        resp = client.get("/cameras/cam-1/bev", headers=auth).json()
        assert resp["bev_points"] == []


def note(event_id, cam="cam-1"):
    return Notification(event_id=event_id, title=f"Anomaly on {cam}",
                        message={"value": event_id}, ts_ms=event_id * 1000,
                        camera_id=cam)


def read_sse_events(client, headers, n):
    """Read the first n SSE notification events from /events."""
    events = []
    with client.stream("GET", "/events", headers=headers,
                       params={"limit": n}) as resp:
        current_id = None
        for line in resp.iter_lines():
            if line.startswith("id: "):
                current_id = int(line[4:])
            elif line.startswith("data: "):
                events.append((current_id, json.loads(line[6:])))
    return events


class TestPushChannel:
    def test_delivery_and_order(self, state, client, auth):
        state.broadcaster.emit(note(1))
        state.broadcaster.emit(note(2))
        events = read_sse_events(client, auth, 2)
        assert [e[0] for e in events] == [1, 2]
        assert events[0][1]["title"] == "Anomaly on cam-1"
        assert set(events[0][1]) <= {"event_id", "title", "message", "ts_ms", "camera_id"}

    def test_resume_after_last_event_id(self, state, client, auth):
        for i in range(1, 5):
            state.broadcaster.emit(note(i))
        headers = dict(auth)
        headers["Last-Event-ID"] = "2"
        events = read_sse_events(client, headers, 2)
        assert [e[0] for e in events] == [3, 4]

    def test_unauthenticated_rejected(self, client):
        assert client.get("/events").status_code == 401

    def test_live_emission_reaches_subscriber(self, state, client, auth):
        result = {}

        def reader():
            result["events"] = read_sse_events(client, auth, 1)

        t = threading.Thread(target=reader)
        t.start()
        time.sleep(0.3)
        state.broadcaster.emit(note(1))
        t.join(timeout=5)
        assert result["events"][0][0] == 1


def test_endpoints_are_read_only(state, client, auth):
    # mutating verbs on data paths must not exist
    for path in ("/cameras/cam-1/status", "/locations"):
        assert client.post(path, headers=auth).status_code == 405
        assert client.delete(path, headers=auth).status_code == 405
