"""Metrics module: empirical CDFs, percentiles and experiment aggregates."""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

PERCENTILES = (0.50, 0.90, 0.99)


@dataclass(frozen=True)
class RecordRow:
    """Flattened, exportable view of one operation record."""
    experiment_id: str
    set_id: int
    op_id: int
    op_type: str
    key_hex: str
    origin_hex: str
    hops: int
    contacted: int
    failed_fast: int
    failed_slow: int
    start_us: int
    end_us: int
    success: bool
    replicas: Optional[int]

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


@dataclass(frozen=True, eq=False)
class Cdf:
    """
    Empirical CDF with ties collapsed.

    `values` are the distinct sample values ascending and `fractions[i]` is
    the share of samples <= values[i]; the last fraction is exactly 1.0.
    """
    values: np.ndarray
    fractions: np.ndarray
    metric_name: str = ""
    unit: str = ""

    def __len__(self) -> int:
        return len(self.values)

    def percentile(self, p: float):
        """Nearest rank: the smallest value whose cumulative fraction is >= p."""
        if not 0.0 < p <= 1.0:
            raise ValueError(f"percentile must be in (0, 1], got {p}")
        idx = int(np.searchsorted(self.fractions, p, side="left"))
        return self.values[min(idx, len(self.values) - 1)].item()

    def points(self) -> List[tuple]:
        return [(v.item(), f.item()) for v, f in zip(self.values, self.fractions)]


def cdf(values: Iterable, metric_name: str = "", unit: str = "") -> Cdf:
    """
    Build the empirical CDF of `values`.

    Examples:
        [5] -> {(5, 1.0)}
        [1, 2, 2, 4] -> {(1, 0.25), (2, 0.75), (4, 1.0)}

    Raises:
        ValueError: if values is empty
    """
    data = np.asarray(list(values))
    if data.size == 0:
        raise ValueError(f"cannot build a CDF of no values ({metric_name or 'unnamed'})")
    distinct, counts = np.unique(data, return_counts=True)
    fractions = np.cumsum(counts) / data.size
    return Cdf(values=distinct, fractions=fractions, metric_name=metric_name, unit=unit)


def percentile_summary(values: Sequence, scale: float = 1.0) -> Dict[str, float]:
    """p50/p90/p99 of values (nearest rank), divided by scale; empty -> {}."""
    if len(values) == 0:
        return {}
    dist = cdf(values)
    summary = {}
    for p in PERCENTILES:
        value = dist.percentile(p)
        summary[f"p{round(p * 100)}"] = value / scale if scale != 1.0 else value
    return summary


def load_histogram(counts: Iterable[int]) -> Dict[str, List[int]]:
    """
    Histogram of per-node contact counts over power-of-two bins.

    Bins are [0, 1), [1, 2), [2, 4), [4, 8), ... up to the first edge above
    the maximum count.
    """
    data = np.asarray(list(counts), dtype=np.int64)
    if data.size == 0:
        return {"edges": [], "counts": []}
    top = int(data.max())
    edges = [0, 1]
    while edges[-1] <= top:
        edges.append(edges[-1] * 2)
    hist, _ = np.histogram(data, bins=np.asarray(edges))
    return {"edges": edges, "counts": [int(c) for c in hist]}


def set_durations_us(rows: Iterable) -> Dict[int, int]:
    """Per set: latest end minus earliest start among its operations."""
    starts: Dict[int, int] = {}
    ends: Dict[int, int] = {}
    for row in rows:
        starts[row.set_id] = min(starts.get(row.set_id, row.start_us), row.start_us)
        ends[row.set_id] = max(ends.get(row.set_id, row.end_us), row.end_us)
    return {set_id: ends[set_id] - starts[set_id] for set_id in sorted(starts)}


@dataclass
class ExperimentAggregate:
    """Summary of one experiment run; serialised with keys in field order."""
    experiment_id: str
    experiment: str
    config: Dict[str, Any]
    op_count: int
    success_rate: float
    hops: Dict[str, float]
    duration_ms: Dict[str, float]
    set_duration_ms: Dict[str, float]
    total_duration_ms: float
    slot_ratio: float
    fits_slot: bool
    unseeded: bool = False
    load_histogram: Dict[str, List[int]] = field(default_factory=dict)
    seeding: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment_id": self.experiment_id,
            "experiment": self.experiment,
            "config": self.config,
            "op_count": self.op_count,
            "success_rate": self.success_rate,
            "hops": self.hops,
            "duration_ms": self.duration_ms,
            "set_duration_ms": self.set_duration_ms,
            "total_duration_ms": self.total_duration_ms,
            "slot_ratio": self.slot_ratio,
            "fits_slot": self.fits_slot,
            "unseeded": self.unseeded,
            "load_histogram": self.load_histogram,
            "seeding": self.seeding,
        }


def record_metrics(rows: Sequence[RecordRow], experiment: str) -> Dict[str, Any]:
    """
    The aggregate fields that depend only on operation records.

    Used both on in-memory records and on records parsed back from CSV, so
    the two can be compared.
    """
    durations = [row.duration_us for row in rows]
    sets = set_durations_us(rows)
    if not rows:
        total_us = 0
    elif experiment == "seeding":
        total_us = max(row.end_us for row in rows) - min(row.start_us for row in rows)
    else:
        total_us = max(sets.values())
    return {
        "op_count": len(rows),
        "success_rate": (sum(1 for row in rows if row.success) / len(rows)) if rows else 0.0,
        "hops": percentile_summary([row.hops for row in rows]),
        "duration_ms": percentile_summary(durations, scale=1000.0),
        "set_duration_ms": percentile_summary(list(sets.values()), scale=1000.0),
        "total_duration_ms": total_us / 1000,
    }
