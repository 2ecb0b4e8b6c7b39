"""Virtual XGS-PON data and control plane.

ONU ingress queues per T-CONT, status (DBRu) reporting, the OLT-side DBA
master producing bandwidth maps, TDM-exclusive upstream bursts over a shared
timeline, broadcast downstream, and per-packet delay-budget instrumentation.

Delay budget intervals (stamped on foreground packets):

  A  RU to ONU transfer
  B  wait for the next status-report opportunity (bounded by one frame)
  C  status report flight from ONU to OLT
  D  scheduling-cycle wait plus DBA compute time
  E  bandwidth map flight from OLT to ONU
  F  wait for the allocated burst window, burst serialization, upstream
     propagation (ends when the last byte reaches the OLT)
  G  OLT to DU+CU transfer

The un-synchronised path traverses A..G; the cooperative path records only
E..G because its report legs happen before the data exists.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Optional

from ponhaul.engine import (
    Engine,
    ConfigError,
    InvariantViolation,
    SimulationError,
    PRIO_BURST,
    PRIO_CYCLE,
    PRIO_RELEASE,
    PRIO_REPORT,
    round_half_up,
)


class LedgerError(SimulationError):
    """Budget-ledger composition or stamping error (instrumentation bug)."""


class TrafficClass(IntEnum):
    TC1 = 1
    TC2 = 2
    TC3 = 3
    TC4 = 4


class Direction(Enum):
    UPSTREAM = "upstream"
    DOWNSTREAM = "downstream"


class DbruOrigin(Enum):
    ONU_STATUS_REPORT = "onu_status_report"
    DU_CU_COOPERATIVE = "du_cu_cooperative"


INTERVALS = "ABCDEFG"


def serialization_time(size_bytes: int, line_rate_bps: int) -> int:
    """Ticks to serialize size_bytes at the line rate, rounded half-up."""
    if size_bytes < 0:
        raise ValueError("size_bytes must be >= 0")
    return (16 * 10**9 * size_bytes + line_rate_bps) // (2 * line_rate_bps)


def propagation_delay(fiber_km: float, per_km: int = 5_000) -> int:
    """Fiber flight time in ticks; 5 us/km by default."""
    if fiber_km < 0:
        raise ValueError("fiber_km must be >= 0")
    return round_half_up(fiber_km * per_km)


class BudgetLedger:
    """Entry/exit timestamps for the delay-budget intervals of one packet.

    Boundaries must be non-decreasing in A..G order; `stamp` rejects
    regressions so instrumentation bugs surface immediately.
    """

    __slots__ = ("marks",)

    def __init__(self):
        self.marks: dict[str, tuple[int, int]] = {}

    def stamp(self, interval: str, entry: int, exit: int) -> None:
        if interval not in INTERVALS:
            raise LedgerError(f"unknown interval {interval!r}")
        if interval in self.marks:
            raise LedgerError(f"interval {interval} stamped twice")
        if exit < entry:
            raise LedgerError(f"interval {interval}: exit {exit} before entry {entry}")
        last = self.last_exit(before=interval)
        if last is not None and entry < last:
            raise LedgerError(
                f"interval {interval}: entry {entry} precedes previous exit {last}")
        self.marks[interval] = (entry, exit)

    def last_exit(self, before: str = "H") -> Optional[int]:
        out = None
        for iv in INTERVALS:
            if iv >= before:
                break
            if iv in self.marks:
                out = self.marks[iv][1]
        return out

    def has(self, intervals: str) -> bool:
        return all(iv in self.marks for iv in intervals)

    def duration(self, interval: str) -> int:
        if interval not in self.marks:
            raise LedgerError(f"interval {interval} not recorded")
        entry, exit = self.marks[interval]
        return exit - entry

    def total(self, intervals: Optional[str] = None) -> int:
        if intervals is None:
            intervals = "".join(iv for iv in INTERVALS if iv in self.marks)
        return sum(self.duration(iv) for iv in intervals)

    def as_dict(self) -> dict[str, int]:
        return {iv: self.duration(iv) for iv in INTERVALS if iv in self.marks}


def compose_unsynchronised_latency(ledger: BudgetLedger) -> int:
    """Sum of all seven intervals; errors if any is missing."""
    missing = [iv for iv in INTERVALS if iv not in ledger.marks]
    if missing:
        raise LedgerError(f"cannot compose full budget, missing {missing}")
    return ledger.total(INTERVALS)


def compose_cooperative_latency(ledger: BudgetLedger) -> int:
    """Sum of intervals E, F and G only; errors if any of them is missing."""
    missing = [iv for iv in "EFG" if iv not in ledger.marks]
    if missing:
        raise LedgerError(f"cannot compose cooperative budget, missing {missing}")
    return ledger.total("EFG")


class IdSource:
    """Per-run packet id counter; never shared between runs, so identical
    configurations produce identical ids."""

    __slots__ = ("_next",)

    def __init__(self):
        self._next = 0

    def take(self) -> int:
        self._next += 1
        return self._next


@dataclass
class FronthaulPacket:
    id: int
    size_bytes: int
    priority_class: TrafficClass
    direction: Direction
    is_foreground: bool = False
    ledger: BudgetLedger = field(default_factory=BudgetLedger)
    wire_bytes: int = 0          # size + encapsulation, set at enqueue
    created_at: int = 0
    reported: bool = False       # status report covering it already sent

    def __post_init__(self):
        if self.size_bytes < 1:
            raise ValueError("size_bytes must be >= 1")


@dataclass
class DbruReport:
    tcont_id: int
    requested_bytes: int
    origin: DbruOrigin
    issued_at: int

    def __post_init__(self):
        if self.requested_bytes <= 0:
            raise ValueError("requested_bytes must be > 0")


@dataclass
class BMapAllocation:
    tcont_id: int
    start_offset: int
    grant_bytes: int
    # runtime fields used by the ONU burst machinery
    start_time: int = 0
    duration: int = 0
    origin: str = "cycle"        # cycle | release | prealloc


@dataclass
class BMap:
    frame_index: int
    allocations: list[BMapAllocation]
    emitted_at: int = 0
    window_start: int = 0
    arrival_at_onu: int = 0


@dataclass
class PonConfig:
    line_rate_bps: int = 10_000_000_000
    fiber_km: float = 1.0
    prop_ns_per_km: int = 5_000
    frame_period: int = 125_000
    dba_compute_time: int = 15_000
    guard_time: int = 1_000
    grant_horizon: int = 35_000
    equalized_reach_km: float = 30.0
    encap_overhead_bytes: int = 8
    dbru_bytes: int = 8
    bmap_bytes: int = 40
    tcont_cap_bytes: int = 10_000_000
    ru_to_onu_delay: int = 0
    olt_to_hub_delay: int = 0
    n_onus: int = 1

    def validate(self) -> list[str]:
        problems = []
        if self.line_rate_bps <= 0:
            problems.append("pon.line_rate_bps must be > 0")
        if self.fiber_km < 0:
            problems.append("pon.fiber_km must be >= 0")
        if self.frame_period <= 0:
            problems.append("pon.frame_period must be > 0")
        if self.dba_compute_time < 0 or self.dba_compute_time >= self.frame_period:
            problems.append("pon.dba_compute_time must be in [0, frame_period)")
        if self.guard_time < 0:
            problems.append("pon.guard_time must be >= 0")
        if self.grant_horizon < 0:
            problems.append("pon.grant_horizon must be >= 0")
        if self.n_onus < 1:
            problems.append("pon.n_onus must be >= 1")
        if self.tcont_cap_bytes < 1:
            problems.append("pon.tcont_cap_bytes must be >= 1")
        return problems

    # derived quantities

    def serialization(self, nbytes: int) -> int:
        return serialization_time(nbytes, self.line_rate_bps)

    def propagation(self) -> int:
        return propagation_delay(self.fiber_km, self.prop_ns_per_km)

    def report_transit(self) -> int:
        """Status-report flight as seen by the scheduler: the OLT ranges every
        ONU to the design reach, so reports register on an equalized clock."""
        reach = max(self.equalized_reach_km, self.fiber_km)
        return self.serialization(self.dbru_bytes) + propagation_delay(
            reach, self.prop_ns_per_km)

    def bmap_transit(self) -> int:
        return self.serialization(self.bmap_bytes) + self.propagation()


class TCont:
    """An ONU-side upstream queue and its occupancy accounting."""

    def __init__(self, tcont_id: int, onu_id: int, priority_class: TrafficClass,
                 cap_bytes: int, status_reporting: bool = True,
                 is_bearer: bool = False):
        self.tcont_id = tcont_id
        self.onu_id = onu_id
        self.priority_class = priority_class
        self.cap_bytes = cap_bytes
        self.status_reporting = status_reporting
        self.is_bearer = is_bearer
        self.queue: deque[FronthaulPacket] = deque()
        self.buffer_occupancy_bytes = 0
        self.offered_bytes = 0
        self.departed_bytes = 0
        self.dropped_bytes = 0
        self.dropped_packets = 0

    def enqueue(self, packet: FronthaulPacket) -> bool:
        self.offered_bytes += packet.wire_bytes
        if self.buffer_occupancy_bytes + packet.wire_bytes > self.cap_bytes:
            self.dropped_bytes += packet.wire_bytes
            self.dropped_packets += 1
            return False
        self.queue.append(packet)
        self.buffer_occupancy_bytes += packet.wire_bytes
        return True


class UpstreamTimeline:
    """Shared upstream medium: reserved burst windows, earliest-fit placement,
    guard gaps between windows of different ONUs."""

    def __init__(self, guard_time: int):
        self.guard = guard_time
        self._active: list[tuple[int, int, int]] = []   # (start, end, onu)
        self.audit: list[tuple[int, int, int]] = []     # every reservation ever

    def reserve(self, min_start: int, duration: int, onu: int) -> int:
        t = min_start
        res = self._active
        i = 0
        while True:
            while i < len(res) and res[i][1] <= t:
                if res[i][2] != onu and t < res[i][1] + self.guard:
                    t = res[i][1] + self.guard
                i += 1
            if i < len(res):
                nxt = res[i]
                need = duration + (self.guard if nxt[2] != onu else 0)
                if t + need <= nxt[0]:
                    res.insert(i, (t, t + duration, onu))
                    break
                t = max(t, nxt[1] + (self.guard if nxt[2] != onu else 0))
                i += 1
            else:
                res.append((t, t + duration, onu))
                break
        self.audit.append((t, t + duration, onu))
        return t

    def prune(self, before: int) -> None:
        # reservations ending before `before - guard` can no longer constrain
        cutoff = before - self.guard
        self._active = [r for r in self._active if r[1] > cutoff]


class Onu:
    """Subscriber-side node: per-class T-CONT queues, status reporting,
    granted upstream bursts."""

    def __init__(self, engine: Engine, config: PonConfig, onu_id: int, olt: "Olt"):
        self.engine = engine
        self.config = config
        self.onu_id = onu_id
        self.olt = olt
        self.tconts: dict[int, TCont] = {}

    def add_tcont(self, tcont: TCont) -> TCont:
        self.tconts[tcont.tcont_id] = tcont
        return tcont

    def enqueue(self, tcont: TCont, packet: FronthaulPacket) -> int:
        """Append a packet to its T-CONT; returns the new occupancy."""
        if packet.direction is not Direction.UPSTREAM:
            raise InvariantViolation("enqueue of a downstream packet at the ONU")
        packet.wire_bytes = packet.size_bytes + self.config.encap_overhead_bytes
        accepted = tcont.enqueue(packet)
        if accepted and packet.is_foreground and "A" not in packet.ledger.marks:
            packet.ledger.stamp("A", packet.created_at, self.engine.now())
        if not accepted:
            self.olt.log("onu%d" % self.onu_id, "drop", packet.id,
                         {"tcont": tcont.tcont_id, "bytes": packet.wire_bytes})
        return tcont.buffer_occupancy_bytes

    def emit_status_reports(self) -> list[DbruReport]:
        """Status-report opportunity at a frame boundary: every reporting
        T-CONT with queued bytes sends its buffer occupancy."""
        now = self.engine.now()
        reports = []
        for tcont in self.tconts.values():
            if not tcont.status_reporting or tcont.buffer_occupancy_bytes == 0:
                continue
            report = DbruReport(tcont.tcont_id, tcont.buffer_occupancy_bytes,
                                DbruOrigin.ONU_STATUS_REPORT, now)
            if tcont.is_bearer:
                for pkt in tcont.queue:
                    if pkt.reported or not pkt.is_foreground:
                        continue
                    pkt.reported = True
                    pkt.ledger.stamp("B", pkt.ledger.last_exit(), now)
                    pkt.ledger.stamp("C", now, now + self.config.report_transit())
            self.olt.submit_status_report(report)
            reports.append(report)
        return reports

    def burst(self, alloc: BMapAllocation, bmap: BMap) -> list[tuple[FronthaulPacket, int]]:
        """Transmit within a granted window: dequeue FIFO packets that fit the
        grant (no fragmentation) and serialize them back to back."""
        now = self.engine.now()
        if now != alloc.start_time:
            raise InvariantViolation(
                f"burst for tcont {alloc.tcont_id} fired at {now}, "
                f"granted window opens at {alloc.start_time}")
        if bmap.arrival_at_onu > now:
            raise InvariantViolation(
                f"burst at {now} before its bandwidth map arrived "
                f"({bmap.arrival_at_onu})")
        tcont = self.tconts[alloc.tcont_id]
        remaining = alloc.grant_bytes
        cumulative = 0
        sent: list[tuple[FronthaulPacket, int]] = []
        prop = self.config.propagation()
        while tcont.queue and tcont.queue[0].wire_bytes <= remaining:
            pkt = tcont.queue.popleft()
            cumulative += pkt.wire_bytes
            remaining -= pkt.wire_bytes
            tcont.buffer_occupancy_bytes -= pkt.wire_bytes
            tcont.departed_bytes += pkt.wire_bytes
            depart = now + self.config.serialization(cumulative) + prop
            if pkt.is_foreground:
                self._stamp_grant_path(pkt, alloc, bmap, depart)
                self.engine.schedule(
                    depart, (lambda p=pkt: self.olt.on_upstream_packet(p)),
                    kind="olt_rx")
            sent.append((pkt, depart))
        used = self.config.serialization(cumulative) if cumulative else 0
        if used > alloc.duration:
            raise InvariantViolation("burst overran its reserved window")
        if used:
            self.olt.record_burst(now, now + used, self.onu_id)
        self.olt.notify_burst_done(tcont, alloc)
        return sent

    def _stamp_grant_path(self, pkt: FronthaulPacket, alloc: BMapAllocation,
                          bmap: BMap, depart: int) -> None:
        ledger = pkt.ledger
        prev = ledger.last_exit()
        if alloc.origin == "cycle":
            d_exit = max(bmap.emitted_at, prev)
            ledger.stamp("D", prev, d_exit)
            e_exit = max(bmap.arrival_at_onu, d_exit)
            ledger.stamp("E", d_exit, e_exit)
            ledger.stamp("F", e_exit, depart)
        elif alloc.origin == "release":
            e_exit = max(bmap.arrival_at_onu, prev)
            ledger.stamp("E", prev, e_exit)
            ledger.stamp("F", e_exit, depart)
        else:  # prealloc: the map arrived before the data existed
            ledger.stamp("E", prev, prev)
            ledger.stamp("F", prev, depart)


class Olt:
    """Head-end node: DBA master, bandwidth-map emission over the shared
    timeline, upstream receive path, broadcast downstream."""

    def __init__(self, engine: Engine, config: PonConfig,
                 sink: Optional[Callable[[FronthaulPacket], None]] = None,
                 log_hook: Optional[Callable] = None):
        self.engine = engine
        self.config = config
        self.sink = sink
        self.log_hook = log_hook
        self.onus: dict[int, Onu] = {}
        self.tcont_onu: dict[int, Onu] = {}
        self.timeline = UpstreamTimeline(config.guard_time)
        # demand bookkeeping
        self._reported: dict[int, tuple[int, int]] = {}   # tcont -> (occ, issue)
        self._grant_log: dict[int, list[tuple[int, int]]] = {}
        self._demand_priority: dict[int, TrafficClass] = {}
        self._coop_pending: dict[int, int] = {}
        self.outstanding_grants: dict[int, int] = {}
        # audit trails
        self.bmaps: list[BMap] = []
        self.bursts: list[tuple[int, int, int]] = []
        self.frame_index = 0
        self.cooperative_dbrus: list[DbruReport] = []

    # wiring -----------------------------------------------------------

    def add_onu(self, onu: Onu) -> None:
        self.onus[onu.onu_id] = onu
        for tcont in onu.tconts.values():
            self.register_tcont(tcont, onu)

    def register_tcont(self, tcont: TCont, onu: Onu) -> None:
        self.tcont_onu[tcont.tcont_id] = onu
        self._grant_log[tcont.tcont_id] = []
        self._coop_pending[tcont.tcont_id] = 0
        self.outstanding_grants[tcont.tcont_id] = 0
        self._demand_priority[tcont.tcont_id] = tcont.priority_class

    def start(self) -> None:
        """Kick off the per-frame reporting and scheduling cycle."""
        self.engine.schedule(0, self._boundary_report, priority=PRIO_REPORT,
                             kind="frame_reports")
        self.engine.schedule(0, self._cycle, priority=PRIO_CYCLE, kind="dba_cycle")

    def log(self, entity, event, packet_id, detail) -> None:
        if self.log_hook is not None:
            self.log_hook(self.engine.now(), entity, event, packet_id, detail)

    # status-report path -------------------------------------------------

    def _boundary_report(self) -> None:
        for onu in self.onus.values():
            onu.emit_status_reports()
        self.engine.schedule_after(self.config.frame_period, self._boundary_report,
                                   priority=PRIO_REPORT, kind="frame_reports")

    def submit_status_report(self, report: DbruReport) -> None:
        """Carry a DBRu to the scheduler; registration happens one equalized
        flight later."""
        register_at = report.issued_at + self.config.report_transit()
        self.engine.schedule(register_at,
                             lambda: self._register_report(report),
                             priority=PRIO_REPORT, kind="dbru_register")
        self.log("onu", "dbru", None,
                 {"tcont": report.tcont_id, "bytes": report.requested_bytes,
                  "origin": report.origin.value})

    def _register_report(self, report: DbruReport) -> None:
        self._reported[report.tcont_id] = (report.requested_bytes, report.issued_at)
        self._grant_log[report.tcont_id] = [
            g for g in self._grant_log[report.tcont_id] if g[0] > report.issued_at]

    # cooperative path ----------------------------------------------------

    def register_cooperative_dbru(self, report: DbruReport, effective_at: int,
                                  origin: str = "release") -> None:
        """A DBRu converted at the DU+CU, delivered with zero PON-side wait.

        The allocation is precomputed during the lead time and its bandwidth
        map released when the demand turns real (`effective_at`), so no
        compute delay is paid on the data path.
        """
        self.cooperative_dbrus.append(report)
        self._coop_pending[report.tcont_id] += report.requested_bytes
        self.engine.schedule(
            effective_at,
            lambda: self._release_grant(report.tcont_id, report.requested_bytes,
                                        origin),
            priority=PRIO_RELEASE, kind="coop_release")

    def _release_grant(self, tcont_id: int, grant_bytes: int, origin: str) -> None:
        emission = self.engine.now()
        arrival = emission + self.config.bmap_transit()
        min_start = max(emission + self.config.grant_horizon, arrival)
        # one released map must still fit a frame; oversize demand rolls over
        max_fit = ((self.config.frame_period - self.config.guard_time)
                   * self.config.line_rate_bps // (8 * 10**9))
        take = min(grant_bytes, self._coop_pending[tcont_id], max_fit)
        if take <= 0:
            return
        self._coop_pending[tcont_id] -= take
        remainder = min(grant_bytes, self._coop_pending[tcont_id] + take) - take
        if remainder > 0:
            self.engine.schedule_after(
                self.config.frame_period,
                lambda: self._release_grant(tcont_id, remainder, origin),
                priority=PRIO_RELEASE, kind="coop_release")
        alloc = BMapAllocation(tcont_id, 0, take, origin=origin)
        self._emit_bmap([alloc], emission, min_start, arrival)

    def pre_allocate(self, tcont_id: int, grant_bytes: int, burst_target: int,
                     emit_at: int) -> None:
        """Pre-position a grant for a predicted arrival (near-ideal): the map
        goes out early enough to reach the ONU by the target instant, and the
        window opens at the target rather than a grant horizon later."""
        def emit():
            emission = self.engine.now()
            arrival = emission + self.config.bmap_transit()
            min_start = max(burst_target, arrival)
            alloc = BMapAllocation(tcont_id, 0, grant_bytes, origin="prealloc")
            self._emit_bmap([alloc], emission, min_start, arrival)
        self.engine.schedule(max(emit_at, self.engine.now()), emit,
                             priority=PRIO_RELEASE, kind="prealloc_emit")

    # DBA cycle ----------------------------------------------------------

    def _cycle(self) -> None:
        now = self.engine.now()
        self.timeline.prune(now)
        demand = []
        for tcont_id, (occ, issue) in self._reported.items():
            granted = sum(b for s, b in self._grant_log[tcont_id] if s > issue)
            outstanding = occ - granted
            if outstanding > 0:
                demand.append((-int(self._demand_priority[tcont_id]), issue,
                               tcont_id, outstanding))
        demand.sort()

        budget = self.config.frame_period
        allocations = []
        for _, _, tcont_id, outstanding in demand:
            max_fit = ((budget - self.config.guard_time) * self.config.line_rate_bps
                       // (8 * 10**9))
            grant = min(outstanding, max(0, max_fit))
            if grant <= 0:
                break
            allocations.append(BMapAllocation(tcont_id, 0, grant, origin="cycle"))
            budget -= self.config.serialization(grant) + self.config.guard_time

        emission = now + self.config.dba_compute_time
        if allocations:
            def emit():
                t = self.engine.now()
                arrival = t + self.config.bmap_transit()
                min_start = max(t + self.config.grant_horizon, arrival)
                self._emit_bmap(allocations, t, min_start, arrival)
            self.engine.schedule(emission, emit, kind="bmap_emit")
        else:
            self.frame_index += 1   # keep-alive: an empty map still frames the cycle
            self.log("olt", "bmap_empty", None, {"frame": self.frame_index})
        self._audit_conservation()
        self.engine.schedule_after(self.config.frame_period, self._cycle,
                                   priority=PRIO_CYCLE, kind="dba_cycle")

    def _emit_bmap(self, allocations: list[BMapAllocation], emission: int,
                   min_start: int, arrival: int) -> BMap:
        self.frame_index += 1
        bmap = BMap(self.frame_index, allocations, emitted_at=emission,
                    window_start=min_start, arrival_at_onu=arrival)
        # place grouped by ONU so same-ONU windows pack without guards
        onu_order: list[int] = []
        for alloc in allocations:
            onu_id = self.tcont_onu[alloc.tcont_id].onu_id
            if onu_id not in onu_order:
                onu_order.append(onu_id)
        total = 0
        for onu_id in onu_order:
            for alloc in allocations:
                onu = self.tcont_onu[alloc.tcont_id]
                if onu.onu_id != onu_id:
                    continue
                dur = self.config.serialization(alloc.grant_bytes)
                start = self.timeline.reserve(min_start, dur, onu_id)
                alloc.start_time = start
                alloc.duration = dur
                alloc.start_offset = start - min_start
                total += dur + self.config.guard_time
                self._grant_log[alloc.tcont_id].append((start, alloc.grant_bytes))
                self.outstanding_grants[alloc.tcont_id] += alloc.grant_bytes
                self.engine.schedule(
                    start,
                    (lambda a=alloc, b=bmap, o=onu: o.burst(a, b)),
                    priority=PRIO_BURST, kind="burst")
        if total > self.config.frame_period:
            raise InvariantViolation(
                f"bandwidth map {self.frame_index} exceeds one frame: {total} ns")
        self.bmaps.append(bmap)
        self.log("olt", "bmap", None,
                 {"frame": bmap.frame_index,
                  "allocs": [(a.tcont_id, a.start_offset, a.grant_bytes)
                             for a in allocations]})
        return bmap

    # data plane ----------------------------------------------------------

    def record_burst(self, start: int, end: int, onu_id: int) -> None:
        self.bursts.append((start, end, onu_id))

    def notify_burst_done(self, tcont: TCont, alloc: BMapAllocation) -> None:
        self.outstanding_grants[tcont.tcont_id] = max(
            0, self.outstanding_grants[tcont.tcont_id] - alloc.grant_bytes)
        # safety net for the cooperative bearer: it never status-reports, so a
        # size misprediction would strand its queue without this re-announce
        if (tcont.is_bearer and not tcont.status_reporting
                and tcont.buffer_occupancy_bytes > 0
                and self.outstanding_grants[tcont.tcont_id] == 0
                and self._coop_pending[tcont.tcont_id] == 0):
            head = tcont.queue[0]
            recovery = DbruReport(tcont.tcont_id, tcont.buffer_occupancy_bytes,
                                  DbruOrigin.DU_CU_COOPERATIVE, self.engine.now())
            self._coop_pending[tcont.tcont_id] += recovery.requested_bytes
            self.engine.schedule_after(
                1, lambda: self._release_grant(tcont.tcont_id,
                                               recovery.requested_bytes, "release"),
                priority=PRIO_RELEASE, kind="recovery_release")
            self.log("olt", "recovery", head.id,
                     {"tcont": tcont.tcont_id, "bytes": recovery.requested_bytes})

    def on_upstream_packet(self, pkt: FronthaulPacket) -> None:
        now = self.engine.now()
        delay = self.config.olt_to_hub_delay
        if pkt.is_foreground:
            pkt.ledger.stamp("G", now, now + delay)
        self.log("olt", "upstream_rx", pkt.id, {"bytes": pkt.wire_bytes})
        if self.sink is None:
            return
        if delay == 0:
            self.sink(pkt)
        else:
            self.engine.schedule_after(delay, lambda: self.sink(pkt),
                                       kind="hub_delivery")

    def downstream_send(self, size_bytes: int,
                        deliveries: list[Callable[[int], None]]) -> int:
        """Broadcast a downstream unit; every ONU hears it at the same tick.
        Returns the delivery time."""
        now = self.engine.now()
        wire = size_bytes + self.config.encap_overhead_bytes
        arrival = now + self.config.serialization(wire) + self.config.propagation()
        def deliver():
            for fn in deliveries:
                fn(arrival)
        self.engine.schedule(arrival, deliver, kind="downstream_rx")
        return arrival

    # invariants ----------------------------------------------------------

    def _audit_conservation(self) -> None:
        for onu in self.onus.values():
            for tcont in onu.tconts.values():
                balance = (tcont.departed_bytes + tcont.buffer_occupancy_bytes
                           + tcont.dropped_bytes)
                if balance != tcont.offered_bytes:
                    raise InvariantViolation(
                        f"byte conservation broken on tcont {tcont.tcont_id}: "
                        f"offered {tcont.offered_bytes}, accounted {balance}")

    def audit_tdm_exclusivity(self) -> None:
        """No two bursts overlap; different-ONU neighbours keep the guard."""
        bursts = sorted(self.bursts)
        for (s1, e1, o1), (s2, e2, o2) in zip(bursts, bursts[1:]):
            gap = self.timeline.guard if o1 != o2 else 0
            if s2 < e1 + gap:
                raise InvariantViolation(
                    f"burst overlap: onu{o1} [{s1},{e1}) vs onu{o2} [{s2},{e2})")
