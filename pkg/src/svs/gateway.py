"""Rule-based gateway: MQTT-style topic filtering, SELECT-based extraction,
and routing of matched messages to table writes or push notifications.

Transport between the edge side and the gateway is either an in-process call
(publish) or length-delimited JSON messages over a local stream socket.
"""
from __future__ import annotations

import json
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .kvstore import KVStore, StoreKey
from .selectql import EvaluationError, SelectStatement, evaluate_where, parse_select, project

log = logging.getLogger(__name__)


class InvalidTopicFilterError(ValueError):
    pass


def match_topic(filter_: str, topic: str) -> bool:
    """MQTT-style wildcard match: '+' is one level, '#' the trailing remainder."""
    levels = filter_.split("/")
    for i, level in enumerate(levels):
        if level == "#" and i != len(levels) - 1:
            raise InvalidTopicFilterError(f"'#' must be the final level: {filter_!r}")
        if "#" in level and level != "#":
            raise InvalidTopicFilterError(f"'#' cannot be part of a level: {filter_!r}")
        if "+" in level and level != "+":
            raise InvalidTopicFilterError(f"'+' cannot be part of a level: {filter_!r}")
    parts = topic.split("/")
    for i, level in enumerate(levels):
        if level == "#":
            return True
        if i >= len(parts):
            return False
        if level == "+":
            continue
        if level != parts[i]:
            return False
    return len(parts) == len(levels)


@dataclass(frozen=True)
class Notification:
    event_id: int
    title: str
    message: dict
    ts_ms: int
    camera_id: str

    def to_doc(self) -> dict:
        return {
            "event_id": self.event_id,
            "title": self.title,
            "message": self.message,
            "ts_ms": self.ts_ms,
            "camera_id": self.camera_id,
        }


@dataclass(frozen=True)
class WriteTable:
    table: str


@dataclass(frozen=True)
class Notify:
    title_template: str


Action = WriteTable | Notify


@dataclass(frozen=True)
class GatewayRule:
    name: str
    topic_filter: str
    select: SelectStatement
    action: Action

    def __post_init__(self):
        match_topic(self.topic_filter, "probe")  # validates filter syntax


def load_rules(text: str) -> list[GatewayRule]:
    """Parse a TOML rule file with [[rules]] entries."""
    import tomli

    doc = tomli.loads(text)
    rules = []
    for entry in doc.get("rules", []):
        stmt = parse_select(entry["select"])
        kind = entry["action"]["type"]
        if kind == "write_table":
            action: Action = WriteTable(entry["action"]["table"])
        elif kind == "notify":
            action = Notify(entry["action"]["title"])
        else:
            raise ValueError(f"unknown action type {kind!r} in rule {entry['name']!r}")
        rules.append(GatewayRule(entry["name"], entry["topic_filter"], stmt, action))
    return rules


@dataclass
class GatewayStats:
    messages: int = 0
    table_writes: int = 0
    notifications: int = 0
    rule_errors: int = 0
    total_latency_s: float = 0.0

    @property
    def mean_latency_ms(self) -> float:
        return 1000.0 * self.total_latency_s / self.messages if self.messages else 0.0


class Gateway:
    """Sequential rule evaluator over inbound (topic, body) messages.

    All matching rules fire, in declaration order. A rule that errors on one
    message is skipped for that message (and logged); the message still reaches
    the remaining rules.
    """

    def __init__(self, rules: list[GatewayRule], store: KVStore,
                 on_notification: Optional[Callable[[Notification], None]] = None):
        self.rules = list(rules)
        self.store = store
        self.on_notification = on_notification
        self.notifications: list[Notification] = []
        self.stats = GatewayStats()
        self._next_event_id = 1

    def publish(self, topic: str, body: dict) -> None:
        start = time.perf_counter()
        self.stats.messages += 1
        for rule in self.rules:
            try:
                self._apply(rule, topic, body)
            except EvaluationError as e:
                self.stats.rule_errors += 1
                log.warning("rule %s skipped for topic %s: %s", rule.name, topic, e)
        self.stats.total_latency_s += time.perf_counter() - start

    def _apply(self, rule: GatewayRule, topic: str, body: dict) -> None:
        if not match_topic(rule.topic_filter, topic):
            return
        if rule.select.topic_filter and not match_topic(rule.select.topic_filter, topic):
            return
        if not evaluate_where(rule.select.where, body):
            return
        row = project(rule.select, body)
        if isinstance(rule.action, WriteTable):
            key = StoreKey(str(body["camera_id"]), int(body["ts_ms"]))
            self.store.put(rule.action.table, key, row)
            self.stats.table_writes += 1
        else:
            title = rule.action.title_template.format(**body)
            note = Notification(
                event_id=self._next_event_id,
                title=title,
                message=row,
                ts_ms=int(body.get("ts_ms", 0)),
                camera_id=str(body.get("camera_id", "")),
            )
            self._next_event_id += 1
            self.notifications.append(note)
            self.stats.notifications += 1
            if self.on_notification is not None:
                self.on_notification(note)


def evaluate_rule(rule: GatewayRule, topic: str, message: dict,
                  store: KVStore) -> Optional[dict]:
    """Evaluate a single rule against one message; returns the projected row
    when the rule fired, else None."""
    gw = Gateway([rule], store)
    gw.publish(topic, message)
    if gw.stats.table_writes or gw.stats.notifications:
        if gw.notifications:
            return gw.notifications[0].to_doc()
        return project(rule.select, message)
    return None


# --- length-delimited socket transport -------------------------------------

_HEADER = struct.Struct(">I")


def send_message(sock: socket.socket, topic: str, body: dict, token: str = "") -> None:
    doc = {"topic": topic, "body": body}
    if token:
        doc["token"] = token
    payload = json.dumps(doc, separators=(",", ":")).encode()
    sock.sendall(_HEADER.pack(len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class GatewayServer:
    """Accepts length-delimited JSON messages on a local TCP socket and feeds
    them to the gateway in arrival order."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0,
                 token: str = ""):
        self.gateway = gateway
        self.token = token
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.address = self._sock.getsockname()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    def serve_forever(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                break
            t = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t

    def _handle(self, conn: socket.socket) -> None:
        with conn:
            while True:
                header = _recv_exact(conn, _HEADER.size)
                if header is None:
                    return
                (length,) = _HEADER.unpack(header)
                payload = _recv_exact(conn, length)
                if payload is None:
                    return
                doc = json.loads(payload)
                if self.token and doc.get("token") != self.token:
                    log.warning("dropping message with bad token")
                    continue
                self.gateway.publish(doc["topic"], doc["body"])

    def stop(self) -> None:
        self._stopping.set()
        self._sock.close()
        for t in self._threads:
            t.join(timeout=1.0)
