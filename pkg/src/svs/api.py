"""Query and push backend for the dashboard.

Read-only endpoints over the KV tables plus a server-sent-event channel for
push notifications. Every response is serialized through an explicit field
allow-list; nothing outside the documented schemas can leak out.
"""
from __future__ import annotations

import json
import queue
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import StreamingResponse

from .analytics import OccupancySample, search_aggregate
from .gateway import Notification
from .kvstore import (
    KVStore,
    TABLE_ANALYTICS,
    TABLE_ANOMALIES,
    TABLE_COUNTS,
    TableNotFoundError,
)
from .model import CameraConfig

DAY_MS = 24 * 3600 * 1000

# Response schemas (allow-lists applied at serialization time).
SCHEMA_STATUS = ("camera_id", "count", "ts_ms", "indicator")
SCHEMA_ANOMALY = ("kind", "category", "camera_id", "record_time", "value", "message")
SCHEMA_SEARCH = ("total", "average", "max", "min", "most_frequent")
SCHEMA_HEATMAP = ("cols", "rows", "extent", "cells")
SCHEMA_NOTIFICATION = ("event_id", "title", "message", "ts_ms", "camera_id")


def _allow(doc: dict, schema: tuple[str, ...]) -> dict:
    return {k: doc[k] for k in schema if k in doc}


class Broadcaster:
    """Fan-out of gateway notifications with monotone event ids.

    Slow clients get disconnected (bounded per-client buffer), never block the
    rest. History is kept so a reconnect can resume from a last-event id.
    """

    def __init__(self, buffer_size: int = 256):
        self._history: list[Notification] = []
        self._subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()
        self._buffer_size = buffer_size

    def emit(self, note: Notification) -> None:
        with self._lock:
            self._history.append(note)
            dead = []
            for q in self._subscribers:
                try:
                    q.put_nowait(note)
                except queue.Full:
                    dead.append(q)
            for q in dead:
                self._subscribers.remove(q)

    def subscribe(self, after_id: int = 0) -> tuple[queue.Queue, list[Notification]]:
        with self._lock:
            backlog = [n for n in self._history if n.event_id > after_id]
            q: queue.Queue = queue.Queue(maxsize=self._buffer_size)
            self._subscribers.append(q)
            return q, backlog

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


@dataclass
class UserAccount:
    user_id: str
    email: str
    password: str
    first_name: str = ""
    last_name: str = ""


@dataclass
class ApiState:
    cameras: list[CameraConfig]
    store: KVStore
    broadcaster: Broadcaster = field(default_factory=Broadcaster)
    heatmaps: dict[str, dict] = field(default_factory=dict)
    users: dict[str, UserAccount] = field(default_factory=dict)
    tokens: dict[str, str] = field(default_factory=dict)  # token -> user_id

    def camera(self, camera_id: str) -> CameraConfig:
        for c in self.cameras:
            if c.camera_id == camera_id:
                return c
        raise HTTPException(status_code=404, detail=f"unknown camera {camera_id}")

    def add_user(self, email: str, password: str, first_name: str = "",
                 last_name: str = "") -> UserAccount:
        user = UserAccount(user_id=f"u{len(self.users) + 1}", email=email,
                           password=password, first_name=first_name, last_name=last_name)
        self.users[email] = user
        return user


def create_app(state: ApiState) -> FastAPI:
    app = FastAPI(title="svs-api")
    app.state.svs = state

    def require_auth(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        token = authorization.removeprefix("Bearer ")
        if token not in state.tokens:
            raise HTTPException(status_code=401, detail="invalid token")
        return state.tokens[token]

    @app.post("/login")
    def login(body: dict):
        email = body.get("email", "")
        password = body.get("password", "")
        user = state.users.get(email)
        if user is None or user.password != password:
            raise HTTPException(status_code=401, detail="bad credentials")
        token = secrets.token_hex(16)
        state.tokens[token] = user.user_id
        return {"token": token, "user_id": user.user_id,
                "first_name": user.first_name, "last_name": user.last_name,
                "email": user.email}

    @app.get("/locations")
    def list_locations(user: str = Depends(require_auth)):
        seen: dict[str, int] = {}
        for c in state.cameras:
            seen[c.location_id] = seen.get(c.location_id, 0) + 1
        return {"locations": [
            {"location_id": loc, "camera_count": n} for loc, n in sorted(seen.items())
        ]}

    @app.get("/locations/{location_id}/cameras")
    def list_cameras(location_id: str, user: str = Depends(require_auth)):
        cams = [c for c in state.cameras if c.location_id == location_id]
        if not cams:
            raise HTTPException(status_code=404, detail=f"unknown location {location_id}")
        return {"cameras": [
            {"camera_id": c.camera_id, "display_name": c.display_name, "live": c.live}
            for c in cams
        ]}

    @app.get("/cameras/{camera_id}/status")
    def current_status(camera_id: str, user: str = Depends(require_auth)):
        state.camera(camera_id)
        latest = state.store.latest(TABLE_COUNTS, camera_id)
        if latest is None:
            return {"camera_id": camera_id, "empty": True}
        key, row = latest
        indicator = "Unknown"
        analytics = state.store.latest(TABLE_ANALYTICS, camera_id)
        if analytics is not None:
            indicator = analytics[1].get("indicator", "Unknown")
        doc = {"camera_id": camera_id, "count": row["count"], "ts_ms": key.ts_ms,
               "indicator": indicator}
        return _allow(doc, SCHEMA_STATUS)

    @app.get("/cameras/{camera_id}/anomalies")
    def anomalies(camera_id: str, window: str = "24h",
                  now_ms: Optional[int] = None,
                  user: str = Depends(require_auth)):
        state.camera(camera_id)
        if not window.endswith("h"):
            raise HTTPException(status_code=422, detail="window must look like '24h'")
        span = int(window[:-1]) * 3600 * 1000
        now = now_ms if now_ms is not None else int(time.time() * 1000)
        try:
            rows = state.store.range(TABLE_ANOMALIES, camera_id, now - span, now)
        except TableNotFoundError:
            rows = []
        events = [_allow(row, SCHEMA_ANOMALY) for _, row in rows]
        events.reverse()  # newest first
        return {"events": events}

    @app.get("/cameras/{camera_id}/heatmap")
    def heatmap(camera_id: str, user: str = Depends(require_auth)):
        cam = state.camera(camera_id)
        grid = state.heatmaps.get(camera_id)
        if grid is None:
            return {"cols": 0, "rows": 0, "extent": list(cam.bev_extent), "cells": []}
        return _allow(grid, SCHEMA_HEATMAP)

    @app.get("/cameras/{camera_id}/bev")
    def bev_snapshot(camera_id: str, user: str = Depends(require_auth)):
        state.camera(camera_id)
        latest = state.store.latest(TABLE_ANALYTICS, camera_id)
        points = [] if latest is None else latest[1].get("bev_points", [])
        return {"camera_id": camera_id, "bev_points": points}

    @app.get("/cameras/{camera_id}/search")
    def search(camera_id: str,
               t0: int = Query(alias="from"),
               t1: int = Query(alias="to"),
               user: str = Depends(require_auth)):
        state.camera(camera_id)
        if t0 > t1:
            raise HTTPException(status_code=422, detail="'from' must be <= 'to'")
        rows = state.store.range(TABLE_COUNTS, camera_id, t0, t1)
        samples = [OccupancySample(camera_id, key.ts_ms, int(row["count"]))
                   for key, row in rows]
        result = search_aggregate(samples, t0, t1)
        if result is None:
            return {"empty": True}
        return _allow(result.to_doc(), SCHEMA_SEARCH)

    @app.get("/events")
    def events(request: Request,
               last_event_id: int = Header(default=0, alias="Last-Event-ID"),
               limit: Optional[int] = None,
               user: str = Depends(require_auth)):
        """SSE stream of push notifications. `limit` ends the stream after that
        many events (used by tests and polling fallbacks); omit it for a
        long-lived subscription."""
        q, backlog = state.broadcaster.subscribe(after_id=last_event_id)

        def stream() -> Iterator[str]:
            sent = 0
            try:
                for note in backlog:
                    yield _sse(note)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                while True:
                    try:
                        note = q.get(timeout=0.5)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if note is None:
                        return
                    yield _sse(note)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                state.broadcaster.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(note: Notification) -> str:
    payload = json.dumps(_allow(note.to_doc(), SCHEMA_NOTIFICATION),
                         separators=(",", ":"), sort_keys=True)
    return f"id: {note.event_id}\nevent: notification\ndata: {payload}\n\n"
