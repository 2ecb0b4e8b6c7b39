"""Background load generation.

High-priority traffic (TC4, representing further LTE-like flows) takes a
configurable share of the upstream load, defaulting to 60%; classes TC1..TC3
split the remainder. Arrivals are Poisson per (ONU, class) with fixed or
uniform packet sizes; the measured foreground flow counts toward the TC4
share, so its rate is subtracted from the TC4 background target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ponhaul.engine import Engine, RngStream, PRIO_ENQUEUE, round_half_up
from ponhaul.pon import Direction, FronthaulPacket, IdSource, Onu, TCont, TrafficClass


def default_class_mix() -> dict[TrafficClass, float]:
    return {
        TrafficClass.TC4: 0.6,
        TrafficClass.TC3: 0.4 / 3,
        TrafficClass.TC2: 0.4 / 3,
        TrafficClass.TC1: 0.4 / 3,
    }


@dataclass
class LoadProfile:
    total_load_fraction: float = 0.0
    class_mix: dict[TrafficClass, float] = field(default_factory=default_class_mix)
    packet_size: tuple = ("uniform", 64, 1500)   # or ("fixed", nbytes)
    seed: int = 0

    def validate(self) -> list[str]:
        problems = []
        if not 0.0 <= self.total_load_fraction <= 1.0:
            problems.append("load.total_load_fraction must be in [0, 1]")
        if any(f < 0 for f in self.class_mix.values()):
            problems.append("load.class_mix fractions must be >= 0")
        if abs(sum(self.class_mix.values()) - 1.0) > 1e-9:
            problems.append("load.class_mix fractions must sum to 1")
        kind = self.packet_size[0]
        if kind == "fixed":
            if self.packet_size[1] < 1:
                problems.append("load.packet_size fixed size must be >= 1")
        elif kind == "uniform":
            lo, hi = self.packet_size[1], self.packet_size[2]
            if not 1 <= lo <= hi:
                problems.append("load.packet_size uniform bounds must satisfy 1 <= lo <= hi")
        else:
            problems.append(f"load.packet_size kind {kind!r} unknown")
        return problems

    def mean_size(self) -> float:
        if self.packet_size[0] == "fixed":
            return float(self.packet_size[1])
        return (self.packet_size[1] + self.packet_size[2]) / 2.0


def background_byte_rates(profile: LoadProfile, line_rate_bps: int,
                          foreground_bps: float = 0.0) -> dict[TrafficClass, float]:
    """Target background byte rate per class (bytes/s). The foreground flow
    belongs to the TC4 share, so its bit rate is deducted there."""
    rates = {}
    for cls, frac in profile.class_mix.items():
        bps = line_rate_bps * profile.total_load_fraction * frac
        if cls is TrafficClass.TC4:
            bps = max(0.0, bps - foreground_bps)
        rates[cls] = bps / 8.0
    return rates


class BackgroundGenerator:
    """Poisson packet arrivals for one (ONU, class) stream."""

    def __init__(self, engine: Engine, onu: Onu, tcont: TCont,
                 profile: LoadProfile, byte_rate: float, ids: IdSource,
                 seed: int):
        self.engine = engine
        self.onu = onu
        self.tcont = tcont
        self.profile = profile
        self.byte_rate = byte_rate
        self.ids = ids
        self.rng = RngStream.for_labels(seed, "traffic", onu.onu_id,
                                        int(tcont.priority_class))
        self.generated_bytes = 0

    def start(self) -> None:
        if self.byte_rate <= 0:
            return
        self._schedule_next()

    def _mean_gap(self) -> float:
        return self.profile.mean_size() / self.byte_rate * 1e9

    def _schedule_next(self) -> None:
        gap = max(1, round_half_up(self.rng.exponential(self._mean_gap())))
        self.engine.schedule_after(gap, self._arrive, priority=PRIO_ENQUEUE,
                                   kind="bg_arrival")

    def _arrive(self) -> None:
        size = self._draw_size()
        pkt = FronthaulPacket(
            id=self.ids.take(),
            size_bytes=size,
            priority_class=self.tcont.priority_class,
            direction=Direction.UPSTREAM,
            is_foreground=False,
            created_at=self.engine.now(),
        )
        self.generated_bytes += size
        self.onu.enqueue(self.tcont, pkt)
        self._schedule_next()

    def _draw_size(self) -> int:
        spec = self.profile.packet_size
        if spec[0] == "fixed":
            return spec[1]
        return self.rng.integers(spec[1], spec[2])


def inject_trace(engine: Engine, onu: Onu, tcont: TCont, ids: IdSource,
                 arrivals: list[tuple[int, int]]) -> list[FronthaulPacket]:
    """Schedule an explicit (time, size) arrival list; used by tests."""
    pkts = []
    for at, size in arrivals:
        pkt = FronthaulPacket(
            id=ids.take(), size_bytes=size, priority_class=tcont.priority_class,
            direction=Direction.UPSTREAM, is_foreground=False, created_at=at)
        engine.schedule(at, (lambda p=pkt: onu.enqueue(tcont, p)),
                        priority=PRIO_ENQUEUE, kind="trace_arrival")
        pkts.append(pkt)
    return pkts
