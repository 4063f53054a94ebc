"""Composite-key table store: camera_id partitions, millisecond-timestamp sort
keys, last-write-wins puts, and ascending range scans. Single writer (the
gateway), many concurrent snapshot readers."""
from __future__ import annotations

import bisect
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional

TABLE_COUNTS = "counts"
TABLE_ANALYTICS = "analytics"
TABLE_ANOMALIES = "anomalies"


class TableNotFoundError(KeyError):
    pass


class KeyNotFoundError(KeyError):
    pass


@dataclass(frozen=True, order=True)
class StoreKey:
    camera_id: str
    ts_ms: int


class _Partition:
    __slots__ = ("ts", "rows")

    def __init__(self):
        self.ts: list[int] = []
        self.rows: list[dict] = []


class KVStore:
    def __init__(self, tables: Optional[list[str]] = None):
        self._tables: dict[str, dict[str, _Partition]] = {}
        self._lock = threading.Lock()
        for t in tables or []:
            self.create_table(t)

    def create_table(self, name: str) -> None:
        with self._lock:
            self._tables.setdefault(name, {})

    def tables(self) -> list[str]:
        return sorted(self._tables)

    def _partition(self, table: str, camera_id: str, create: bool) -> Optional[_Partition]:
        if table not in self._tables:
            raise TableNotFoundError(table)
        parts = self._tables[table]
        if camera_id not in parts:
            if not create:
                return None
            parts[camera_id] = _Partition()
        return parts[camera_id]

    def put(self, table: str, key: StoreKey, row: dict) -> None:
        """Insert or overwrite (last-write-wins at equal keys)."""
        with self._lock:
            part = self._partition(table, key.camera_id, create=True)
            i = bisect.bisect_left(part.ts, key.ts_ms)
            if i < len(part.ts) and part.ts[i] == key.ts_ms:
                part.rows[i] = dict(row)
            else:
                part.ts.insert(i, key.ts_ms)
                part.rows.insert(i, dict(row))

    def get(self, table: str, key: StoreKey) -> dict:
        with self._lock:
            part = self._partition(table, key.camera_id, create=False)
            if part is None:
                raise KeyNotFoundError(key)
            i = bisect.bisect_left(part.ts, key.ts_ms)
            if i < len(part.ts) and part.ts[i] == key.ts_ms:
                return dict(part.rows[i])
            raise KeyNotFoundError(key)

    def range(self, table: str, camera_id: str, t0: int, t1: int) -> list[tuple[StoreKey, dict]]:
        """Rows for one camera with t0 <= ts_ms <= t1, ascending by timestamp."""
        if t0 > t1:
            raise ValueError(f"bad range: {t0} > {t1}")
        with self._lock:
            part = self._partition(table, camera_id, create=False)
            if part is None:
                return []
            lo = bisect.bisect_left(part.ts, t0)
            hi = bisect.bisect_right(part.ts, t1)
            return [
                (StoreKey(camera_id, part.ts[i]), dict(part.rows[i]))
                for i in range(lo, hi)
            ]

    def latest(self, table: str, camera_id: str) -> Optional[tuple[StoreKey, dict]]:
        with self._lock:
            part = self._partition(table, camera_id, create=False)
            if part is None or not part.ts:
                return None
            return StoreKey(camera_id, part.ts[-1]), dict(part.rows[-1])

    def scan(self, table: str) -> Iterator[tuple[StoreKey, dict]]:
        with self._lock:
            if table not in self._tables:
                raise TableNotFoundError(table)
            snapshot = [
                (StoreKey(cam, ts), dict(row))
                for cam, part in sorted(self._tables[table].items())
                for ts, row in zip(part.ts, part.rows)
            ]
        return iter(snapshot)

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for table in self.tables():
            with open(directory / f"{table}.jsonl", "w") as f:
                for key, row in self.scan(table):
                    doc = {"camera_id": key.camera_id, "ts_ms": key.ts_ms, "row": row}
                    f.write(json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: Path) -> "KVStore":
        store = cls()
        for path in sorted(Path(directory).glob("*.jsonl")):
            table = path.stem
            store.create_table(table)
            with open(path) as f:
                for line in f:
                    doc = json.loads(line)
                    store.put(table, StoreKey(doc["camera_id"], doc["ts_ms"]), doc["row"])
        return store
