"""Operation ledger: op counters, cost accumulator, depth trace."""

from __future__ import annotations

import threading
from collections import Counter

from .params import SchemeParams


class OpLedger:
    """Thread-safe tally of primitive ops and their abstract cost.

    Per-slot gate ops count one unit per processed slot, so
    ``cost_units == sum(counters[op] * cost_table[op])`` holds uniformly.
    Ledgers can also be merged associatively for per-worker accounting.
    """

    def __init__(self, params: SchemeParams):
        self.params = params
        self.counters: Counter = Counter()
        self.cost_units: float = 0.0
        self.depth_trace: list[tuple[str, int, int]] = []
        self._lock = threading.Lock()

    def record(self, op: str, level_before: int, level_after: int, count: int = 1):
        with self._lock:
            self.counters[op] += count
            self.cost_units += count * self.params.cost_of(op)
            self.depth_trace.append((op, level_before, level_after))

    def recompute_cost(self) -> float:
        """Cost recomputed from scratch; must equal the running accumulator."""
        return sum(n * self.params.cost_of(op) for op, n in self.counters.items())

    def merge(self, other: "OpLedger") -> "OpLedger":
        with self._lock:
            self.counters.update(other.counters)
            self.cost_units += other.cost_units
            self.depth_trace.extend(other.depth_trace)
        return self

    @property
    def bootstrap_count(self) -> int:
        return self.counters["bootstrap"]

    def snapshot(self) -> dict:
        return {
            "counters": dict(self.counters),
            "cost_units": self.cost_units,
            "bootstrap_count": self.bootstrap_count,
        }
