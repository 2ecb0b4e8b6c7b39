"""Scenario runner.

`ponhaul run` executes one configuration and writes the report, histograms
and (optionally) the event log; `ponhaul sweep` runs a distance or
packet-size series for one or more scenarios and writes a plot-ready CSV
plus the compliant-distance summary.

Exit codes: 0 ok, 2 configuration error, 3 runtime invariant violation.
Precedence: command-line flags > config file > built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from ponhaul.engine import ConfigError, InvariantViolation
from ponhaul.scenario import Scenario, ScenarioConfig, Simulation, sweep


def load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ScenarioConfig.from_dict(data)


def apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> None:
    if getattr(args, "scenario", None):
        cfg.scenario = Scenario(args.scenario)
    if getattr(args, "distance_km", None) is not None:
        cfg.pon.fiber_km = args.distance_km
    if getattr(args, "packet_size", None) is not None:
        cfg.lte.tb_size_bytes = args.packet_size
    if getattr(args, "load", None) is not None:
        cfg.load.total_load_fraction = args.load
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "duration", None) is not None:
        cfg.duration_s = args.duration
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    if getattr(args, "event_log", False):
        cfg.event_log = True


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    apply_overrides(cfg, args)
    sim = Simulation(cfg)
    report = sim.run()
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    apply_overrides(cfg, args)
    values = []
    for chunk in args.values.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        values.append(float(chunk) if args.axis == "distance" else int(chunk))
    scenarios = None
    if args.scenario:
        scenarios = [Scenario(args.scenario)]
    rows, summary = sweep(cfg, args.axis, values, scenarios=scenarios,
                          parallel=args.parallel)
    out_dir = args.out or cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    table = os.path.join(out_dir, f"sweep_{args.axis.replace('-', '_')}.csv")
    with open(table, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "scenario", "axis", "value", "mean_rtt_us", "min_rtt_us",
            "max_rtt_us", "jitter_mean_us", "margin_us", "compliant",
            "sample_count", "total_load"])
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(out_dir, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(json.dumps(summary, indent=2))
    print(f"rows written to {table}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponhaul",
        description="XGS-PON mobile-fronthaul latency simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario")
    run_p.add_argument("--config", help="JSON config file")
    run_p.add_argument("--scenario", choices=[s.value for s in Scenario])
    run_p.add_argument("--distance-km", type=float, dest="distance_km")
    run_p.add_argument("--packet-size", type=int, dest="packet_size")
    run_p.add_argument("--load", type=float)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--duration", type=float, help="simulated seconds")
    run_p.add_argument("--out", help="artifact directory")
    run_p.add_argument("--event-log", action="store_true", dest="event_log")
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a series of scenarios")
    sweep_p.add_argument("--config", help="JSON config file")
    sweep_p.add_argument("--axis", choices=["distance", "packet-size"],
                         required=True)
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated axis values")
    sweep_p.add_argument("--scenario", choices=[s.value for s in Scenario],
                         help="restrict to one scenario (default: all three)")
    sweep_p.add_argument("--load", type=float)
    sweep_p.add_argument("--seed", type=int)
    sweep_p.add_argument("--duration", type=float)
    sweep_p.add_argument("--out", help="artifact directory")
    sweep_p.add_argument("--parallel", type=int, default=0,
                         help="worker processes for sweep points")
    sweep_p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
