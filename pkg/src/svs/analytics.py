"""Statistical layer over persisted records: occupancy series, distribution
stats, statistical anomalies, hourly box plots, the occupancy indicator, BEV
projection, heat maps, and historical search aggregates.

Everything here is pure computation over immutable snapshots; only aggregate
numbers ever leave this module, never per-person data.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

from .model import GlobalRecord, ValidationError

DEFAULT_BUCKET_MS = 1000
MS_PER_HOUR = 3600 * 1000


@dataclass(frozen=True)
class OccupancySample:
    camera_id: str
    bucket_start: int  # UTC ms
    count: int  # distinct global IDs within the bucket


@dataclass(frozen=True)
class OccupancyStats:
    camera_id: str
    hour_of_day: int
    n: int
    mean: float
    std: float  # population
    min: float
    p25: float
    p75: float
    max: float


class Indicator(str, Enum):
    UNDER = "Under"
    NORMAL = "Normal"
    OVER = "Over"
    UNKNOWN = "Unknown"


def occupancy_series(records: Sequence[GlobalRecord], bucket_ms: int = DEFAULT_BUCKET_MS) -> list[OccupancySample]:
    """Distinct-global-ID count per time bucket for one camera's records.

    Buckets with no activity inside the observed span are emitted with count 0
    so the series is dense.
    """
    if not records:
        return []
    cam = records[0].camera_id
    last_ts = None
    ids_by_bucket: dict[int, set[int]] = defaultdict(set)
    for r in records:
        if r.camera_id != cam:
            raise ValidationError("occupancy_series expects records from one camera")
        if last_ts is not None and r.record_time < last_ts:
            raise ValidationError("records must be time-sorted")
        last_ts = r.record_time
        bucket = (r.record_time // bucket_ms) * bucket_ms
        ids_by_bucket[bucket].add(r.global_id)
    first = min(ids_by_bucket)
    last = max(ids_by_bucket)
    out = []
    for b in range(first, last + bucket_ms, bucket_ms):
        out.append(OccupancySample(cam, b, len(ids_by_bucket.get(b, ()))))
    return out


def distribution_stats(series: Sequence[OccupancySample]) -> tuple[float, float]:
    """Mean and population standard deviation of the counts."""
    if not series:
        raise ValidationError("distribution_stats needs at least one sample")
    counts = [s.count for s in series]
    mean = sum(counts) / len(counts)
    var = sum((c - mean) ** 2 for c in counts) / len(counts)
    return mean, math.sqrt(var)


def statistical_anomaly(value: float, mean: float, std: float) -> bool:
    """True iff value strictly exceeds mean + 2*std."""
    if std < 0:
        raise ValidationError("std must be >= 0")
    return value > mean + 2.0 * std


def percentile_linear(sorted_vals: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile, h = (n-1)p + 1 on 1-based ranks."""
    n = len(sorted_vals)
    if n == 0:
        raise ValidationError("empty group")
    if n == 1:
        return float(sorted_vals[0])
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return sorted_vals[lo] + frac * (sorted_vals[hi] - sorted_vals[lo])


def hourly_boxplot(history: Sequence[OccupancySample]) -> dict[tuple[str, int], OccupancyStats]:
    """Box-plot stats per (camera, UTC hour-of-day). Hours with no samples are
    simply absent from the result."""
    groups: dict[tuple[str, int], list[int]] = defaultdict(list)
    for s in history:
        hour = (s.bucket_start // MS_PER_HOUR) % 24
        groups[(s.camera_id, hour)].append(s.count)
    out: dict[tuple[str, int], OccupancyStats] = {}
    for (cam, hour), counts in groups.items():
        counts.sort()
        n = len(counts)
        mean = sum(counts) / n
        var = sum((c - mean) ** 2 for c in counts) / n
        out[(cam, hour)] = OccupancyStats(
            camera_id=cam,
            hour_of_day=hour,
            n=n,
            mean=mean,
            std=math.sqrt(var),
            min=float(counts[0]),
            p25=percentile_linear(counts, 0.25),
            p75=percentile_linear(counts, 0.75),
            max=float(counts[-1]),
        )
    return out


def occupancy_indicator(current: int, stats: Optional[OccupancyStats]) -> Indicator:
    """Classify the current count against the hour's p25..p75 band (inclusive)."""
    if stats is None:
        return Indicator.UNKNOWN
    if current < stats.p25:
        return Indicator.UNDER
    if current > stats.p75:
        return Indicator.OVER
    return Indicator.NORMAL


class HorizonError(ValueError):
    """Homogeneous denominator vanished: the point maps to infinity."""


def bev_project(point: tuple[float, float], h: Sequence[float]) -> tuple[float, float]:
    """Projective map of an image point through a row-major 3x3 homography."""
    x, y = point
    d = h[6] * x + h[7] * y + h[8]
    if abs(d) <= 1e-12:
        raise HorizonError(f"point {point} lies on the homography horizon")
    return ((h[0] * x + h[1] * y + h[2]) / d, (h[3] * x + h[4] * y + h[5]) / d)


@dataclass
class HeatmapGrid:
    camera_id: str
    cols: int
    rows: int
    extent: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    cells: list[int] = None  # row-major, rows x cols
    discarded: int = 0

    def __post_init__(self):
        if self.cols <= 0 or self.rows <= 0:
            raise ValidationError("grid dims must be positive")
        if self.cells is None:
            self.cells = [0] * (self.cols * self.rows)

    def cell(self, col: int, row: int) -> int:
        return self.cells[row * self.cols + col]

    def export(self) -> dict:
        return {
            "cols": self.cols,
            "rows": self.rows,
            "extent": list(self.extent),
            "cells": list(self.cells),
        }


def heatmap_accumulate(points: Iterable[tuple[float, float]], grid: HeatmapGrid) -> HeatmapGrid:
    """Bin BEV points into the grid (half-open cells). Out-of-extent points go
    to the discard tally rather than disappearing."""
    x0, y0, x1, y1 = grid.extent
    cw = (x1 - x0) / grid.cols
    ch = (y1 - y0) / grid.rows
    for x, y in points:
        if x0 <= x < x1 and y0 <= y < y1:
            col = int((x - x0) / cw)
            row = int((y - y0) / ch)
            col = min(col, grid.cols - 1)
            row = min(row, grid.rows - 1)
            grid.cells[row * grid.cols + col] += 1
        else:
            grid.discarded += 1
    return grid


@dataclass(frozen=True)
class SearchResult:
    total: int
    average: float
    max: int
    min: int
    most_frequent: int

    def to_doc(self) -> dict:
        return {
            "total": self.total,
            "average": self.average,
            "max": self.max,
            "min": self.min,
            "most_frequent": self.most_frequent,
        }


def search_aggregate(samples: Sequence[OccupancySample], t0: int, t1: int) -> Optional[SearchResult]:
    """Aggregates over samples whose bucket_start falls in [t0, t1].

    Returns None for an empty window; zeros are never fabricated."""
    if t0 > t1:
        raise ValidationError(f"bad window: {t0} > {t1}")
    counts = [s.count for s in samples if t0 <= s.bucket_start <= t1]
    if not counts:
        return None
    freq = Counter(counts)
    top = max(freq.values())
    most_frequent = min(v for v, n in freq.items() if n == top)
    return SearchResult(
        total=sum(counts),
        average=sum(counts) / len(counts),
        max=max(counts),
        min=min(counts),
        most_frequent=most_frequent,
    )


class OccupancyTracker:
    """Streaming per-camera occupancy history: running mean/std baseline for
    statistical anomalies plus the hour-of-day groups behind the indicator."""

    def __init__(self, camera_id: str, bucket_ms: int = DEFAULT_BUCKET_MS):
        self.camera_id = camera_id
        self.bucket_ms = bucket_ms
        self.samples: list[OccupancySample] = []
        self._by_hour: dict[int, list[int]] = defaultdict(list)
        self._n = 0
        self._sum = 0.0
        self._sumsq = 0.0

    def baseline(self) -> Optional[tuple[float, float]]:
        if self._n == 0:
            return None
        mean = self._sum / self._n
        var = max(0.0, self._sumsq / self._n - mean * mean)
        return mean, math.sqrt(var)

    def observe(self, bucket_start: int, count: int) -> bool:
        """Record one bucket; returns True when it is a statistical anomaly
        against the history seen so far (the new bucket excluded)."""
        base = self.baseline()
        is_anomaly = base is not None and statistical_anomaly(count, base[0], base[1])
        self.samples.append(OccupancySample(self.camera_id, bucket_start, count))
        self._by_hour[(bucket_start // MS_PER_HOUR) % 24].append(count)
        self._n += 1
        self._sum += count
        self._sumsq += count * count
        return is_anomaly

    def hour_stats(self, ts_ms: int) -> Optional[OccupancyStats]:
        hour = (ts_ms // MS_PER_HOUR) % 24
        counts = self._by_hour.get(hour)
        if not counts:
            return None
        counts = sorted(counts)
        n = len(counts)
        mean = sum(counts) / n
        var = sum((c - mean) ** 2 for c in counts) / n
        return OccupancyStats(
            camera_id=self.camera_id,
            hour_of_day=hour,
            n=n,
            mean=mean,
            std=math.sqrt(var),
            min=float(counts[0]),
            p25=percentile_linear(counts, 0.25),
            p75=percentile_linear(counts, 0.75),
            max=float(counts[-1]),
        )
