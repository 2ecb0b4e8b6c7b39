"""Deterministic discrete-event simulator of an XGS-PON access network
carrying MAC/PHY functional-split mobile fronthaul traffic.

The package models the upstream data and control plane of a 10 Gbps
symmetrical PON (status reports, DBA grant cycles, bandwidth maps, TDM
bursts), a timing-level LTE MAC scheduler feeding it, background load,
and the statistics needed to judge fronthaul latency compliance.
"""

from ponhaul.engine import (
    Engine,
    RngStream,
    SimulationError,
    ConfigError,
    SchedulingError,
    InvariantViolation,
    US,
    MS,
    SEC,
)
from ponhaul.pon import (
    TrafficClass,
    Direction,
    BudgetLedger,
    FronthaulPacket,
    PonConfig,
    serialization_time,
    propagation_delay,
    compose_unsynchronised_latency,
    compose_cooperative_latency,
)
from ponhaul.lte import LteConfig
from ponhaul.traffic import LoadProfile
from ponhaul.metrics import RunReport, ngmn_margin, max_compliant_distance
from ponhaul.scenario import Scenario, ScenarioConfig, run_scenario, sweep

__all__ = [
    "Engine",
    "RngStream",
    "SimulationError",
    "ConfigError",
    "SchedulingError",
    "InvariantViolation",
    "US",
    "MS",
    "SEC",
    "TrafficClass",
    "Direction",
    "BudgetLedger",
    "FronthaulPacket",
    "PonConfig",
    "serialization_time",
    "propagation_delay",
    "compose_unsynchronised_latency",
    "compose_cooperative_latency",
    "LteConfig",
    "LoadProfile",
    "RunReport",
    "ngmn_margin",
    "max_compliant_distance",
    "Scenario",
    "ScenarioConfig",
    "run_scenario",
    "sweep",
]

__version__ = "0.1.0"
