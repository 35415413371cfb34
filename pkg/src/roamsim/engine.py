"""Deterministic discrete-event core: virtual clock, event queue, seeded RNG."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Callable

# Virtual time is kept in integer microseconds so that event ordering never
# depends on floating-point rounding.
SimTime = int

US_PER_S = 1_000_000


def micros(seconds: float) -> SimTime:
    """Convert seconds to the integer-microsecond clock."""
    return int(round(seconds * US_PER_S))


def seconds(us: SimTime) -> float:
    return us / US_PER_S


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True)
class Event:
    """A pending engine event, ordered lexicographically by (due, seq)."""

    due: SimTime
    seq: int
    kind: str


@dataclass
class SimStats:
    processed: int = 0
    cancelled: int = 0
    clock_us: SimTime = 0


class Engine:
    """Single-threaded event loop over integer-microsecond virtual time.

    All model randomness flows through ``rng``, a single seeded Mersenne
    Twister stream (``random.Random``), so one seed fully determines a run.
    Ties on the due time are broken by insertion order. An instance is not
    thread-safe, but independent instances share nothing and may run
    concurrently.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock: SimTime = 0
        self._heap: list[tuple[SimTime, int]] = []
        self._pending: dict[int, tuple[Callable[[], None], str]] = {}
        self._seq = 0
        self._processed = 0
        self._cancelled = 0

    def schedule(self, due: SimTime, fn: Callable[[], None], kind: str = "event") -> int:
        """Enqueue ``fn`` to run at ``due``; returns a cancellable event id."""
        if due < self.clock:
            raise SchedulingError(
                f"cannot schedule {kind} at t={due}us before clock {self.clock}us"
            )
        eid = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (due, eid))
        self._pending[eid] = (fn, kind)
        return eid

    def call_in(self, delay_us: SimTime, fn: Callable[[], None], kind: str = "event") -> int:
        return self.schedule(self.clock + delay_us, fn, kind)

    def cancel(self, event_id: int) -> bool:
        """Remove a pending event. False if it already fired or is unknown."""
        if self._pending.pop(event_id, None) is None:
            return False
        self._cancelled += 1
        return True

    def pending(self) -> list[Event]:
        """Snapshot of still-pending events in execution order (for inspection)."""
        live = [
            Event(due, seq, self._pending[seq][1])
            for due, seq in self._heap
            if seq in self._pending
        ]
        return sorted(live, key=lambda e: (e.due, e.seq))

    def run_until(self, limit: SimTime) -> SimStats:
        """Process every event with due <= limit in (due, seq) order.

        The clock ends exactly at ``limit`` even if the queue drains early.
        """
        if limit < self.clock:
            raise SchedulingError(f"run_until({limit}) is before clock {self.clock}")
        while self._heap and self._heap[0][0] <= limit:
            due, eid = heapq.heappop(self._heap)
            entry = self._pending.pop(eid, None)
            if entry is None:
                continue  # cancelled, lazily dropped
            self.clock = due
            fn, _ = entry
            fn()
        self.clock = limit
        return SimStats(self._processed_total(), self._cancelled, self.clock)

    def _processed_total(self) -> int:
        # processed = everything ever scheduled minus still-pending minus cancelled
        return self._seq - len(self._pending) - self._cancelled
