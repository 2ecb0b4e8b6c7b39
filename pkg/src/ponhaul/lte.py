"""Timing-level model of the LTE MAC scheduler and radio unit.

Periodic uplink grants (information reports) are issued on subframe
boundaries; each grant triggers an uplink transport block at the RU a fixed
number of subframes later. In cooperative scenarios the report is converted
to a DBRu at the DU+CU and handed to the DBA master immediately; the
near-ideal variant additionally predicts the next uplink from the report
cadence and pre-positions its grant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ponhaul.engine import Engine, PRIO_ENQUEUE
from ponhaul.pon import (
    DbruOrigin,
    DbruReport,
    Direction,
    FronthaulPacket,
    IdSource,
    Olt,
    Onu,
    TCont,
    TrafficClass,
)

SUBFRAME = 1_000_000  # 1 ms LTE FDD subframe, in ticks


@dataclass
class InformationReport:
    report_id: int
    subframe_index: int
    allocated_tb_bytes: int
    target_ue: int = 0


@dataclass
class LteConfig:
    subframe_duration: int = SUBFRAME
    uplink_trigger_offset_subframes: int = 4
    grant_period_subframes: int = 1
    tb_size_bytes: int = 141
    epoch_offset: int = 0        # shifts the first report off the frame grid

    def validate(self) -> list[str]:
        problems = []
        if self.subframe_duration <= 0:
            problems.append("lte.subframe_duration must be > 0")
        if self.uplink_trigger_offset_subframes < 0:
            problems.append("lte.uplink_trigger_offset_subframes must be >= 0")
        if self.grant_period_subframes < 1:
            problems.append("lte.grant_period_subframes must be >= 1")
        if self.tb_size_bytes < 0:
            problems.append("lte.tb_size_bytes must be >= 0")
        return problems

    @property
    def trigger_delay(self) -> int:
        return self.uplink_trigger_offset_subframes * self.subframe_duration


class MacScheduler:
    """Issues information reports and injects the uplink data they allocate."""

    def __init__(self, engine: Engine, config: LteConfig, onu: Onu,
                 bearer: TCont, ids: IdSource,
                 ru_to_onu_delay: int = 0,
                 on_report: Optional[Callable[[InformationReport], None]] = None,
                 on_inject: Optional[Callable[[FronthaulPacket], None]] = None):
        self.engine = engine
        self.config = config
        self.onu = onu
        self.bearer = bearer
        self.ids = ids
        self.ru_to_onu_delay = ru_to_onu_delay
        self.on_report = on_report
        self.on_inject = on_inject
        self.reports: list[InformationReport] = []
        self._subframe = 0

    def start(self) -> None:
        self.engine.schedule(self.config.epoch_offset, self._issue_grant,
                             kind="lte_report")

    def _issue_grant(self) -> None:
        report = InformationReport(
            report_id=len(self.reports) + 1,
            subframe_index=self._subframe,
            allocated_tb_bytes=self.config.tb_size_bytes,
        )
        self.reports.append(report)
        if self.on_report is not None:
            self.on_report(report)
        if report.allocated_tb_bytes > 0:
            self.engine.schedule_after(self.config.trigger_delay,
                                       lambda: self._uplink_data_emit(report),
                                       priority=PRIO_ENQUEUE, kind="lte_uplink")
        self._subframe += self.config.grant_period_subframes
        self.engine.schedule_after(
            self.config.grant_period_subframes * self.config.subframe_duration,
            self._issue_grant, kind="lte_report")

    def _uplink_data_emit(self, report: InformationReport) -> None:
        pkt = FronthaulPacket(
            id=self.ids.take(),
            size_bytes=report.allocated_tb_bytes,
            priority_class=TrafficClass.TC4,
            direction=Direction.UPSTREAM,
            is_foreground=True,
            created_at=self.engine.now(),
        )
        if self.on_inject is not None:
            self.on_inject(pkt)
        if self.ru_to_onu_delay == 0:
            self.onu.enqueue(self.bearer, pkt)
        else:
            self.engine.schedule_after(self.ru_to_onu_delay,
                                       lambda: self.onu.enqueue(self.bearer, pkt),
                                       priority=PRIO_ENQUEUE, kind="ru_to_onu")


class CooperativeBridge:
    """Converts information reports to DBRu messages inside the DU+CU and
    hands them to the DBA master with zero PON-side wait."""

    def __init__(self, engine: Engine, config: LteConfig, olt: Olt,
                 bearer: TCont, encap_overhead: int, ru_to_onu_delay: int = 0):
        self.engine = engine
        self.config = config
        self.olt = olt
        self.bearer = bearer
        self.encap_overhead = encap_overhead
        self.ru_to_onu_delay = ru_to_onu_delay
        self.dbrus: list[DbruReport] = []

    def arrival_of(self, report: InformationReport) -> int:
        """Instant the report's uplink data will reach the ONU queue."""
        return (self.engine.now() + self.config.trigger_delay
                + self.ru_to_onu_delay)

    def on_report(self, report: InformationReport) -> Optional[DbruReport]:
        if report.allocated_tb_bytes <= 0:
            return None
        dbru = DbruReport(
            tcont_id=self.bearer.tcont_id,
            requested_bytes=report.allocated_tb_bytes + self.encap_overhead,
            origin=DbruOrigin.DU_CU_COOPERATIVE,
            issued_at=self.engine.now(),
        )
        self.dbrus.append(dbru)
        self.olt.register_cooperative_dbru(dbru, self.arrival_of(report))
        return dbru


class GrantPredictor:
    """Near-ideal variant: a single-period lock-step estimator over the DBRu
    cadence pre-positions the next grant at the predicted data arrival.

    The n-th uplink's timing is forecast from the (n-1)-th report's instant
    plus the last inter-report gap. A cold start or a cadence change falls
    back to plain cooperative handling for that one packet.
    """

    def __init__(self, engine: Engine, config: LteConfig, olt: Olt,
                 bearer: TCont, encap_overhead: int,
                 headroom: int = 10_000, booking_margin: int = 40_000,
                 ru_to_onu_delay: int = 0):
        self.engine = engine
        self.config = config
        self.olt = olt
        self.bearer = bearer
        self.encap_overhead = encap_overhead
        self.headroom = headroom
        self.booking_margin = booking_margin
        self.ru_to_onu_delay = ru_to_onu_delay
        self.dbrus: list[DbruReport] = []
        self._last_report_at: Optional[int] = None
        self._pending: dict[int, int] = {}   # predicted arrival -> grant bytes
        self.fallbacks = 0
        self.covered = 0

    def on_report(self, report: InformationReport) -> Optional[DbruReport]:
        now = self.engine.now()
        if report.allocated_tb_bytes <= 0:
            self._last_report_at = now
            return None
        wire = report.allocated_tb_bytes + self.encap_overhead
        dbru = DbruReport(self.bearer.tcont_id, wire,
                          DbruOrigin.DU_CU_COOPERATIVE, now)
        self.dbrus.append(dbru)

        arrival = now + self.config.trigger_delay + self.ru_to_onu_delay
        self._pending = {t: b for t, b in self._pending.items() if t >= arrival}
        if self._pending.pop(arrival, None) is not None:
            self.covered += 1          # grant already pre-positioned
        else:
            self.fallbacks += 1
            self.olt.register_cooperative_dbru(dbru, arrival)

        if self._last_report_at is not None:
            gap = now - self._last_report_at
            predicted = now + gap + self.config.trigger_delay + self.ru_to_onu_delay
            target = predicted + self.headroom
            lead = max(self.olt.config.bmap_transit(), self.booking_margin)
            self.olt.pre_allocate(self.bearer.tcont_id, wire, target,
                                  emit_at=target - lead)
            self._pending[predicted] = wire
        self._last_report_at = now
        return dbru
