"""Experiment wiring: configuration, a full simulation run, and sweeps.

A run assembles the engine, one OLT, the ONUs and their T-CONTs, the LTE
scheduler with the bridge matching the chosen scenario, background load, and
the DU+CU sink that answers every foreground packet with a downstream ACK so
round trips can be measured at the RU.
"""

from __future__ import annotations

import concurrent.futures
import copy
import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ponhaul.engine import (
    Engine,
    ConfigError,
    InvariantViolation,
    RngStream,
    round_half_up,
    stable_seed,
)
from ponhaul.lte import CooperativeBridge, GrantPredictor, LteConfig, MacScheduler
from ponhaul.metrics import MetricsCollector, RunReport, histogram_csv_rows, max_compliant_distance
from ponhaul.pon import (
    FronthaulPacket,
    IdSource,
    Olt,
    Onu,
    PonConfig,
    TCont,
    TrafficClass,
    propagation_delay,
)
from ponhaul.traffic import BackgroundGenerator, LoadProfile, background_byte_rates


class Scenario(str, Enum):
    UNSYNCHRONISED = "unsynchronised"
    COOPERATIVE = "cooperative"
    NEAR_IDEAL = "near_ideal"


BEARER_TCONT_ID = 1


@dataclass
class ScenarioConfig:
    scenario: Scenario = Scenario.COOPERATIVE
    pon: PonConfig = field(default_factory=PonConfig)
    lte: LteConfig = field(default_factory=LteConfig)
    load: LoadProfile = field(default_factory=LoadProfile)
    duration_s: float = 1.0
    warmup_s: float = 0.1
    seed: int = 1
    out_dir: Optional[str] = None
    calibrated_processing: bool = False
    processing_range_us: tuple = (57.0, 82.0)
    ack_bytes: Optional[int] = None          # None: ACK mirrors the request size
    ni_headroom: int = 10_000
    ni_booking_margin: int = 40_000
    event_log: bool = False

    def validate(self) -> None:
        problems = []
        if not isinstance(self.scenario, Scenario):
            problems.append(f"scenario {self.scenario!r} unknown")
        problems += self.pon.validate()
        problems += self.lte.validate()
        problems += self.load.validate()
        if self.duration_s <= 0:
            problems.append("duration_s must be > 0")
        if self.warmup_s < 0:
            problems.append("warmup_s must be >= 0")
        if self.duration_s <= self.warmup_s:
            problems.append("duration_s must exceed warmup_s")
        lo, hi = self.processing_range_us
        if not 0 <= lo <= hi:
            problems.append("processing_range_us must satisfy 0 <= low <= high")
        if self.ack_bytes is not None and self.ack_bytes < 1:
            problems.append("ack_bytes must be >= 1")
        if self.ni_headroom < 0 or self.ni_booking_margin < 0:
            problems.append("ni_headroom and ni_booking_margin must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario.value,
            "pon": dataclasses.asdict(self.pon),
            "lte": dataclasses.asdict(self.lte),
            "load": {
                "total_load_fraction": self.load.total_load_fraction,
                "class_mix": {f"TC{int(c)}": f for c, f in self.load.class_mix.items()},
                "packet_size": list(self.load.packet_size),
                "seed": self.load.seed,
            },
            "duration_s": self.duration_s,
            "warmup_s": self.warmup_s,
            "seed": self.seed,
            "calibrated_processing": self.calibrated_processing,
            "processing_range_us": list(self.processing_range_us),
            "ack_bytes": self.ack_bytes,
            "ni_headroom": self.ni_headroom,
            "ni_booking_margin": self.ni_booking_margin,
            "event_log": self.event_log,
        }
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {
            "scenario", "pon", "lte", "load", "duration_s", "warmup_s", "seed",
            "out_dir", "calibrated_processing", "processing_range_us",
            "ack_bytes", "ni_headroom", "ni_booking_margin", "event_log",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        if "scenario" in data:
            try:
                cfg.scenario = Scenario(data["scenario"])
            except ValueError:
                raise ConfigError(
                    f"scenario must be one of "
                    f"{[s.value for s in Scenario]}, got {data['scenario']!r}")
        for section, target in (("pon", PonConfig), ("lte", LteConfig)):
            if section in data:
                fields = {f.name for f in dataclasses.fields(target)}
                unknown = set(data[section]) - fields
                if unknown:
                    raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
                setattr(cfg, section, target(**data[section]))
        if "load" in data:
            raw = dict(data["load"])
            unknown = set(raw) - {"total_load_fraction", "class_mix",
                                  "packet_size", "seed"}
            if unknown:
                raise ConfigError(f"unknown load keys: {sorted(unknown)}")
            profile = LoadProfile()
            if "total_load_fraction" in raw:
                profile.total_load_fraction = float(raw["total_load_fraction"])
            if "class_mix" in raw:
                try:
                    profile.class_mix = {
                        TrafficClass[name]: float(frac)
                        for name, frac in raw["class_mix"].items()}
                except KeyError as exc:
                    raise ConfigError(f"unknown traffic class {exc}")
            if "packet_size" in raw:
                profile.packet_size = tuple(raw["packet_size"])
            if "seed" in raw:
                profile.seed = int(raw["seed"])
            cfg.load = profile
        for key in ("duration_s", "warmup_s", "seed", "out_dir",
                    "calibrated_processing", "ack_bytes", "ni_headroom",
                    "ni_booking_margin", "event_log"):
            if key in data and data[key] is not None:
                setattr(cfg, key, data[key])
        if "processing_range_us" in data:
            cfg.processing_range_us = tuple(data["processing_range_us"])
        return cfg


class EventLog:
    """Line-delimited run log with stable field ordering."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.lines: list[str] = []

    def emit(self, time_ns, entity, event, packet_id, detail) -> None:
        if not self.enabled:
            return
        record = {"time_ns": time_ns, "entity": entity, "event": event,
                  "packet_id": packet_id, "detail": detail}
        self.lines.append(json.dumps(record, separators=(",", ":")))

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines))
            if self.lines:
                fh.write("\n")


class DuCuSink:
    """DU+CU endpoint: receives foreground upstream packets, applies the
    (optional) processing delay, and answers with a downstream ACK whose
    reception at the RU closes the round trip."""

    def __init__(self, engine: Engine, olt: Olt, collector: MetricsCollector,
                 config: ScenarioConfig, log: EventLog):
        self.engine = engine
        self.olt = olt
        self.collector = collector
        self.config = config
        self.log = log
        self.deliveries: list[dict] = []
        lo, hi = config.processing_range_us
        self._proc_range = (lo * 1000.0, hi * 1000.0)
        self._proc_rng = RngStream.for_labels(config.seed, "hub_processing")

    def on_delivery(self, pkt: FronthaulPacket) -> None:
        now = self.engine.now()
        one_way = now - pkt.created_at
        self.collector.record_ledger(pkt.ledger, pkt.created_at, one_way)
        self.deliveries.append({
            "packet_id": pkt.id,
            "created_at": pkt.created_at,
            "hub_at": now,
            "one_way": one_way,
            "intervals": pkt.ledger.as_dict(),
        })
        self.log.emit(now, "hub", "delivery", pkt.id,
                      {"one_way_ns": one_way})
        measured = pkt.ledger.total()
        if abs(measured - one_way) > 1:
            raise InvariantViolation(
                f"budget decomposition broken for packet {pkt.id}: "
                f"intervals sum to {measured}, measured {one_way}")
        proc = 0
        if self.config.calibrated_processing:
            proc = round_half_up(self._proc_rng.uniform(*self._proc_range))
        ack_size = self.config.ack_bytes or pkt.size_bytes
        def send_ack():
            self.olt.downstream_send(ack_size, [lambda t, p=pkt: self._ack(p, t)])
        if proc == 0:
            send_ack()
        else:
            self.engine.schedule_after(proc, send_ack, kind="hub_ack")

    def _ack(self, pkt: FronthaulPacket, arrival: int) -> None:
        ack_at_ru = arrival + self.config.pon.ru_to_onu_delay
        self.collector.record_rtt(pkt.id, ack_at_ru, pkt.size_bytes)
        self.log.emit(arrival, "ru", "ack", pkt.id, {"ack_at_ns": ack_at_ru})


class Simulation:
    """One fully wired, single-threaded run."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.engine = Engine()
        self.ids = IdSource()
        self.log = EventLog(config.event_log)
        pon = config.pon
        self.collector = MetricsCollector(
            scenario=config.scenario.value,
            distance_km=pon.fiber_km,
            packet_size=config.lte.tb_size_bytes,
            warmup=round_half_up(config.warmup_s * 1e9),
            min_rtt_floor=2 * propagation_delay(pon.fiber_km, pon.prop_ns_per_km),
        )
        self.sink = DuCuSink(self.engine, None, self.collector, config, self.log)
        self.olt = Olt(self.engine, pon, sink=self.sink.on_delivery,
                       log_hook=self.log.emit)
        self.sink.olt = self.olt

        self.onus: list[Onu] = []
        self.bearer: Optional[TCont] = None
        for onu_id in range(pon.n_onus):
            onu = Onu(self.engine, pon, onu_id, self.olt)
            if onu_id == 0:
                self.bearer = onu.add_tcont(TCont(
                    BEARER_TCONT_ID, 0, TrafficClass.TC4, pon.tcont_cap_bytes,
                    status_reporting=(config.scenario is Scenario.UNSYNCHRONISED),
                    is_bearer=True))
            for cls in TrafficClass:
                onu.add_tcont(TCont(
                    100 + onu_id * 10 + int(cls), onu_id, cls,
                    pon.tcont_cap_bytes, status_reporting=True))
            self.olt.add_onu(onu)
            self.onus.append(onu)

        bridge_fn = None
        self.bridge = None
        if config.scenario is Scenario.COOPERATIVE:
            self.bridge = CooperativeBridge(
                self.engine, config.lte, self.olt, self.bearer,
                pon.encap_overhead_bytes, pon.ru_to_onu_delay)
            bridge_fn = self.bridge.on_report
        elif config.scenario is Scenario.NEAR_IDEAL:
            self.bridge = GrantPredictor(
                self.engine, config.lte, self.olt, self.bearer,
                pon.encap_overhead_bytes, headroom=config.ni_headroom,
                booking_margin=config.ni_booking_margin,
                ru_to_onu_delay=pon.ru_to_onu_delay)
            bridge_fn = self.bridge.on_report

        def on_inject(pkt: FronthaulPacket) -> None:
            self.collector.note_departure(pkt.id, self.engine.now())
            self.log.emit(self.engine.now(), "ru", "inject", pkt.id,
                          {"bytes": pkt.size_bytes})

        self.mac = MacScheduler(
            self.engine, config.lte, self.onus[0], self.bearer, self.ids,
            ru_to_onu_delay=pon.ru_to_onu_delay,
            on_report=bridge_fn, on_inject=on_inject)

        fg_bps = 0.0
        if config.lte.tb_size_bytes > 0:
            period_ns = config.lte.grant_period_subframes * config.lte.subframe_duration
            fg_bps = config.lte.tb_size_bytes * 8 * 1e9 / period_ns
        rates = background_byte_rates(config.load, pon.line_rate_bps, fg_bps)
        load_seed = stable_seed(config.seed, "load", config.load.seed)
        self.generators: list[BackgroundGenerator] = []
        for onu in self.onus:
            for cls in TrafficClass:
                rate = rates.get(cls, 0.0) / pon.n_onus
                if rate <= 0:
                    continue
                tcont = onu.tconts[100 + onu.onu_id * 10 + int(cls)]
                self.generators.append(BackgroundGenerator(
                    self.engine, onu, tcont, config.load, rate, self.ids,
                    load_seed))

        self.report: Optional[RunReport] = None

    def run(self) -> RunReport:
        self.olt.start()
        self.mac.start()
        for gen in self.generators:
            gen.start()
        self.engine.run_until(round_half_up(self.config.duration_s * 1e9))
        self.olt.audit_tdm_exclusivity()
        self.olt._audit_conservation()
        drops = {f"TC{int(cls)}": 0 for cls in TrafficClass}
        for onu in self.onus:
            for tcont in onu.tconts.values():
                drops[f"TC{int(tcont.priority_class)}"] += tcont.dropped_packets
        self.report = self.collector.build_report(
            total_load=self.config.load.total_load_fraction,
            seed=self.config.seed,
            duration_s=self.config.duration_s,
            drops=drops)
        if self.config.out_dir:
            self._write_artifacts()
        return self.report

    def _write_artifacts(self) -> None:
        out = self.config.out_dir
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.json"), "w") as fh:
            json.dump(self.report.to_dict(), fh, indent=2)
            fh.write("\n")
        with open(os.path.join(out, "config.json"), "w") as fh:
            json.dump(self.config.to_dict(), fh, indent=2)
            fh.write("\n")
        for name, hist in (("rtt_histogram.csv", self.report.rtt_histogram),
                           ("jitter_histogram.csv", self.report.jitter_histogram)):
            with open(os.path.join(out, name), "w", newline="") as fh:
                writer = csv.DictWriter(
                    fh, fieldnames=["bin_low_us", "bin_high_us", "count",
                                    "probability"])
                writer.writeheader()
                writer.writerows(histogram_csv_rows(hist))
        if self.config.event_log:
            self.log.write(os.path.join(out, "events.jsonl"))


def run_scenario(config: ScenarioConfig) -> RunReport:
    return Simulation(config).run()


def _sweep_point(config: ScenarioConfig, scenario: Scenario, axis: str,
                 value) -> dict:
    cfg = copy.deepcopy(config)
    cfg.scenario = scenario
    cfg.out_dir = None
    cfg.event_log = False
    if axis == "distance":
        cfg.pon.fiber_km = float(value)
    elif axis == "packet-size":
        cfg.lte.tb_size_bytes = int(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    cfg.seed = stable_seed(config.seed, scenario.value, axis, value)
    report = Simulation(cfg).run()
    return {
        "scenario": scenario.value,
        "axis": axis,
        "value": value,
        "mean_rtt_us": round(report.rtt_mean / 1000.0, 4),
        "min_rtt_us": round(report.rtt_min / 1000.0, 4),
        "max_rtt_us": round(report.rtt_max / 1000.0, 4),
        "jitter_mean_us": round(report.jitter_mean / 1000.0, 4),
        "margin_us": round(report.ngmn_margin / 1000.0, 4),
        "compliant": report.compliant,
        "sample_count": report.sample_count,
        "total_load": cfg.load.total_load_fraction,
    }


def sweep(config: ScenarioConfig, axis: str, values: list,
          scenarios: Optional[list[Scenario]] = None,
          parallel: int = 0) -> tuple[list[dict], dict]:
    """One run per (scenario, axis value). Returns sorted rows plus, for
    distance sweeps, the maximum compliant distance per scenario."""
    if len(values) < 2:
        raise ConfigError("sweep needs at least two axis values")
    if scenarios is None:
        scenarios = list(Scenario)
    points = [(s, v) for s in scenarios for v in values]
    rows = []
    failures = []
    if parallel and parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(_sweep_point, config, s, axis, v)
                       for s, v in points]
            for (s, v), fut in zip(points, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:   # per-point failures don't stop the sweep
                    failures.append({"scenario": s.value, "value": v,
                                     "error": str(exc)})
    else:
        for s, v in points:
            try:
                rows.append(_sweep_point(config, s, axis, v))
            except Exception as exc:
                failures.append({"scenario": s.value, "value": v,
                                 "error": str(exc)})
    rows.sort(key=lambda r: (r["scenario"], r["value"]))
    summary = {"axis": axis, "failures": failures}
    if axis == "distance":
        crossings = {}
        for s in scenarios:
            pts = [(r["value"], r["margin_us"]) for r in rows
                   if r["scenario"] == s.value]
            if len(pts) >= 2:
                crossing = max_compliant_distance(pts)
                if crossing is None:
                    crossings[s.value] = None
                elif crossing == float("inf"):
                    crossings[s.value] = "beyond-sweep"
                else:
                    crossings[s.value] = round(crossing, 3)
        summary["max_compliant_distance_km"] = crossings
    return rows, summary
