"""Command-line runner.

Headless by default: load a scenario, run N control ticks (scripted or
autonomous), print the run report as JSON. With --serve the same run is
paced in real time behind the network service so consoles can connect.

Exit codes: 0 clean, 1 invariant violation (collision during an
autonomous run), 2 usage error, 3 scenario/config problem.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .runner import (
    RunReport,
    build_supervisor,
    bundled_scenario_path,
    load_script,
    run_headless,
    ScriptError,
)
from .supervisor import AUTONOMOUS
from .world import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_SCENARIO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carebot",
        description="Deterministic companion-robot simulator and teleop service.",
    )
    parser.add_argument("--scenario", required=True,
                        help="scenario map file, or the name of a bundled map "
                             "(open_room_20, pillars_20, rooms_20, cross_20)")
    parser.add_argument("--ticks", type=int, default=0,
                        help="number of control ticks to run (default 0)")
    parser.add_argument("--mode", choices=("manual", "autonomous"), default="manual",
                        help="initial mode (a mode_set command is injected for autonomous)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario RNG seed")
    parser.add_argument("--script", default=None,
                        help="command trace file: '<tick> <wire message>' per line")
    parser.add_argument("--serve", action="store_true",
                        help="serve the teleop protocol while running (paced in real time)")
    parser.add_argument("--port", type=int, default=None,
                        help="service port (default from config, 8790)")
    parser.add_argument("--config", default=None, help="key = value config file")
    parser.add_argument("--report", default=None, help="also write the run report to this file")
    return parser


def _load_world(args) -> "tuple":
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        bundled = bundled_scenario_path(args.scenario)
        if bundled.exists():
            scenario_path = bundled
        else:
            raise ScenarioError(f"scenario not found: {args.scenario}")
    world = load_scenario(scenario_path.read_text())
    if args.seed is not None:
        if args.seed < 0:
            raise ScenarioError("seed must be non-negative")
        world = replace(world, rng_seed=args.seed)
    return world


def _emit_report(report: RunReport, args) -> None:
    text = report.to_json()
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.port is not None:
            cfg = replace(cfg, port=args.port)
        world = _load_world(args)
        script = None
        if args.script:
            script = load_script(Path(args.script).read_text())
    except (ConfigError, ScenarioError, ScriptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO

    if args.serve:
        from .service import serve_forever

        report = serve_forever(world, cfg, mode=args.mode, ticks=args.ticks, script=script)
        _emit_report(report, args)
    else:
        try:
            supervisor = build_supervisor(world, cfg)
        except (ScenarioError, ConfigError, OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
        report, _ = run_headless(
            world, cfg, mode=args.mode, ticks=args.ticks, script=script, supervisor=supervisor
        )
        _emit_report(report, args)

    if args.mode == AUTONOMOUS.lower() and report.collisions > 0:
        print("invariant violation: collisions during autonomous run", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
