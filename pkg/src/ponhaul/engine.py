"""Deterministic discrete-event core.

A virtual clock in integer nanosecond ticks, an ordered future-event queue,
and reproducible counter-based random streams shared by the other modules.
One tick is 1 ns: the smallest quantity the model serializes (one byte at
10 Gbps, 0.8 ns) rounds to a tick, while everything reported is on the
microsecond scale.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Tick arithmetic: 1 tick == 1 ns.
NS = 1
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000


class SimulationError(Exception):
    """Base class for simulator faults."""


class ConfigError(SimulationError):
    """Invalid configuration. The CLI maps this to exit code 2."""


class SchedulingError(SimulationError):
    """Event-scheduling contract violation (e.g. scheduling in the past)."""


class InvariantViolation(SimulationError):
    """A runtime invariant failed. The CLI maps this to exit code 3."""


def round_half_up(x: float) -> int:
    """Round a duration in ns to integer ticks, halves up."""
    return math.floor(x + 0.5)


# Dispatch phases for events sharing a timestamp; lower fires first.
# Data leaves queues before the queues are reported, reports register
# before the scheduling cycle that may consume them, and grant releases
# see the packet that triggered them already enqueued.
PRIO_BURST = 10
PRIO_ENQUEUE = 15
PRIO_REPORT = 20
PRIO_RELEASE = 25
PRIO_CYCLE = 30
PRIO_DEFAULT = 50


@dataclass
class Event:
    """A scheduled callback.

    Events with equal ``fire_at`` dispatch in ascending ``(priority, seq)``;
    ``seq`` is the insertion counter, so same-phase ties keep FIFO order.
    """

    fire_at: int
    priority: int
    seq: int
    kind: str
    fn: Callable[[], None]
    cancelled: bool = False


class EventHandle:
    """Permits cancellation of a scheduled event."""

    __slots__ = ("_event",)

    def __init__(self, event: Event):
        self._event = event

    def cancel(self) -> None:
        self._event.cancelled = True

    @property
    def fire_at(self) -> int:
        return self._event.fire_at


class Engine:
    """Single-threaded event loop over a (fire_at, priority, seq) heap.

    Not shared across threads during a run; independent runs may execute
    in parallel with fully private engines.
    """

    def __init__(self):
        self._heap: list[tuple[int, int, int, Event]] = []
        self._seq = 0
        self._now = 0
        self.dispatched = 0

    def now(self) -> int:
        return self._now

    def schedule(self, fire_at: int, fn: Callable[[], None], *,
                 priority: int = PRIO_DEFAULT, kind: str = "") -> EventHandle:
        if fire_at < self._now:
            raise SchedulingError(
                f"cannot schedule {kind or 'event'} at t={fire_at} ns: "
                f"clock is already at {self._now} ns")
        ev = Event(fire_at, priority, self._seq, kind, fn)
        heapq.heappush(self._heap, (fire_at, priority, self._seq, ev))
        self._seq += 1
        return EventHandle(ev)

    def schedule_after(self, delay: int, fn: Callable[[], None], *,
                       priority: int = PRIO_DEFAULT, kind: str = "") -> EventHandle:
        return self.schedule(self._now + delay, fn, priority=priority, kind=kind)

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with fire_at <= t_end, in order.

        Returns the number of events dispatched; the clock ends at t_end
        even if the queue ran dry earlier.
        """
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) behind clock {self._now}")
        count = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            _, _, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self._now = ev.fire_at
            ev.fn()
            count += 1
        self._now = t_end
        self.dispatched += count
        return count


def _stream_id(labels: tuple) -> int:
    """Stable 64-bit stream id from a label tuple (not Python hash(), which
    is salted per process)."""
    digest = hashlib.md5(repr(labels).encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Counter-based random stream: identical (seed, stream id) yields an
    identical draw sequence regardless of what other streams drew."""

    def __init__(self, seed: int, stream_id: int):
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed & (2**64 - 1), stream_id & (2**64 - 1)], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @classmethod
    def for_labels(cls, seed: int, *labels) -> "RngStream":
        return cls(seed, _stream_id(labels))

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def exponential(self, mean: float) -> float:
        return float(self._gen.exponential(mean))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] inclusive."""
        return int(self._gen.integers(low, high, endpoint=True))

    def random(self) -> float:
        return float(self._gen.random())


def stable_seed(*parts) -> int:
    """Derive a 63-bit run seed from arbitrary labels, stable across
    platforms and processes."""
    digest = hashlib.md5(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1
