"""Brute-force reference for the status-report upstream pipeline.

Enumerates the frame-by-frame queue/grant evolution of a small scenario with
flat lists and explicit loops (no event queue, no shared code with the
simulator) and returns per-packet departure times (last byte at the OLT).

Pipeline rules enumerated here (the simulator must match them exactly):

* Frame boundaries at k * frame_period. A T-CONT with queued bytes at a
  boundary emits a status report carrying its buffer occupancy; the report
  registers at the OLT scheduler ser(dbru) + prop(equalized reach) later.
* A packet is in the queue at instant t if it arrived at or before t and no
  burst starting at or before t dequeued it (bursts act before reports at a
  shared instant; arrivals act before reports and after bursts).
* The scheduling cycle at boundary k sees reports registered at or before
  the boundary. Outstanding demand of a T-CONT is its last reported
  occupancy minus all grant bytes whose burst window opens after that
  report's issue instant, floored at zero.
* Grants are issued in strict priority order (TC4 first), FIFO within a
  class by report issue time then T-CONT id, and are capped so that the
  grant serialization times plus one guard time each fit in a frame period.
* The bandwidth map is emitted dba_compute_time after the cycle. Each
  allocation opens at the earliest free instant of the shared upstream
  timeline at or after max(emission + grant_horizon, map arrival at the
  ONU); consecutive windows of different ONUs are separated by the guard
  time; allocations of one map are placed grouped by ONU.
* A burst dequeues FIFO packets while the next packet's wire size fits the
  remaining grant bytes (head-of-line packets never fragment). The n-th
  dequeued packet departs at start + ser(cumulative wire bytes) +
  prop(fiber).
"""

from dataclasses import dataclass, field


@dataclass
class OraclePacket:
    pid: int
    arrival: int
    onu: int
    tcont: int
    priority: int  # traffic class, 4 = highest
    wire_bytes: int


@dataclass
class OracleConfig:
    line_rate_bps: int = 10_000_000_000
    fiber_km: float = 1.0
    equalized_reach_km: float = 30.0
    prop_ns_per_km: int = 5_000
    frame_period: int = 125_000
    dba_compute_time: int = 15_000
    grant_horizon: int = 35_000
    guard_time: int = 1_000
    dbru_bytes: int = 8
    bmap_bytes: int = 40


def _ser(nbytes: int, rate: int) -> int:
    # duration of nbytes at line rate, half-up to integer ns
    return (16 * 10**9 * nbytes + rate) // (2 * rate)


def _prop(km: float, per_km: int) -> int:
    import math
    return math.floor(km * per_km + 0.5)


def _reserve(reservations, min_start, duration, onu, guard):
    """Earliest-fit into the sorted reservation list with cross-ONU guards."""
    t = min_start
    i = 0
    while True:
        # clamp t below the neighbour that precedes it
        while i < len(reservations) and reservations[i][1] <= t:
            prev = reservations[i]
            if prev[2] != onu and t < prev[1] + guard:
                t = prev[1] + guard
            i += 1
        if i < len(reservations):
            nxt = reservations[i]
            need = duration + (guard if nxt[2] != onu else 0)
            if t + need <= nxt[0]:
                reservations.insert(i, (t, t + duration, onu))
                return t
            t = max(t, nxt[1] + (guard if nxt[2] != onu else 0))
            i += 1
        else:
            reservations.append((t, t + duration, onu))
            return t


def run_oracle(packets, cfg: OracleConfig, max_frames: int = 4000):
    """Return {pid: departure_ns} for the un-synchronised pipeline."""
    pkts = sorted(packets, key=lambda p: (p.arrival, p.pid))
    tconts = sorted({p.tcont for p in pkts})
    tcont_meta = {}
    for p in pkts:
        tcont_meta[p.tcont] = (p.onu, p.priority)

    report_transit = _ser(cfg.dbru_bytes, cfg.line_rate_bps) + _prop(
        max(cfg.equalized_reach_km, cfg.fiber_km), cfg.prop_ns_per_km)
    bmap_transit = _ser(cfg.bmap_bytes, cfg.line_rate_bps) + _prop(
        cfg.fiber_km, cfg.prop_ns_per_km)
    data_prop = _prop(cfg.fiber_km, cfg.prop_ns_per_km)

    departures = {}
    burst_start_of = {}          # pid -> start of the burst that dequeued it
    inflight_reports = []        # (register_at, tcont, occupancy, issue)
    olt_state = {}               # tcont -> (occupancy, issue)
    grant_log = {t: [] for t in tconts}   # tcont -> [(burst_start, bytes)]
    pending_bursts = []          # (start, tcont, grant_bytes)
    reservations = []            # (start, end, onu) sorted by start

    def queued(tcont, t):
        """FIFO queue of `tcont` as seen by a report at instant t."""
        out = []
        for p in pkts:
            if p.tcont != tcont or p.arrival > t:
                continue
            if p.pid in burst_start_of and burst_start_of[p.pid] <= t:
                continue
            out.append(p)
        return out

    def execute_burst(start, tcont, grant):
        onu, _ = tcont_meta[tcont]
        rem = grant
        cum = 0
        for p in pkts:
            if p.tcont != tcont or p.pid in departures:
                continue
            if p.arrival >= start:   # burst fires before a same-instant arrival
                break
            if p.wire_bytes > rem:
                break                # head of line never fragments
            cum += p.wire_bytes
            rem -= p.wire_bytes
            departures[p.pid] = start + _ser(cum, cfg.line_rate_bps) + data_prop
            burst_start_of[p.pid] = start

    for k in range(max_frames):
        t = k * cfg.frame_period

        # burst windows opening at or before this boundary fire first
        pending_bursts.sort()
        while pending_bursts and pending_bursts[0][0] <= t:
            start, tcont, grant = pending_bursts.pop(0)
            execute_burst(start, tcont, grant)

        # reports registered at the OLT by this boundary
        inflight_reports.sort()
        while inflight_reports and inflight_reports[0][0] <= t:
            _, tcont, occ, issue = inflight_reports.pop(0)
            olt_state[tcont] = (occ, issue)
            grant_log[tcont] = [g for g in grant_log[tcont] if g[0] > issue]

        # ONU status reporting at the boundary
        for tcont in tconts:
            occ = sum(p.wire_bytes for p in queued(tcont, t))
            if occ > 0:
                inflight_reports.append((t + report_transit, tcont, occ, t))

        # scheduling cycle: strict priority, FIFO within class, frame budget
        demand = []
        for tcont, (occ, issue) in olt_state.items():
            granted = sum(b for s, b in grant_log[tcont] if s > issue)
            outstanding = max(0, occ - granted)
            if outstanding > 0:
                onu, prio = tcont_meta[tcont]
                demand.append((-prio, issue, tcont, outstanding, onu))
        demand.sort()

        budget = cfg.frame_period
        allocations = []
        for _, _, tcont, outstanding, onu in demand:
            max_fit = (budget - cfg.guard_time) * cfg.line_rate_bps // (8 * 10**9)
            grant = min(outstanding, max(0, max_fit))
            if grant <= 0:
                break
            allocations.append((tcont, grant, onu))
            budget -= _ser(grant, cfg.line_rate_bps) + cfg.guard_time

        if allocations:
            emission = t + cfg.dba_compute_time
            min_start = max(emission + cfg.grant_horizon, emission + bmap_transit)
            onu_order = []
            for tcont, grant, onu in allocations:
                if onu not in onu_order:
                    onu_order.append(onu)
            for onu in onu_order:
                for tcont, grant, alloc_onu in allocations:
                    if alloc_onu != onu:
                        continue
                    dur = _ser(grant, cfg.line_rate_bps)
                    start = _reserve(reservations, min_start, dur, onu,
                                     cfg.guard_time)
                    pending_bursts.append((start, tcont, grant))
                    grant_log[tcont].append((start, grant))

        if len(departures) == len(pkts) and not pending_bursts:
            break

    return departures
