"""
NTN Split Simulator - Main Application Entry Point
O-RAN functional split and RIC placement over LEO/GEO constellations
"""

import argparse
import asyncio
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from flow import create_compare_flow, create_dimension_flow, create_simulation_flow, create_validate_flow
from nodes import summarize
from utils.config import configure_logging, get_config
from utils.dimensioning import AirInterfaceConfig, Direction, default_prb
from utils.errors import DimensioningError, NtnSimError
from utils.report_formatter import format_summary, render_text
from utils.scenario import scenario_schema

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2

_DIRECTIONS = {"dl": Direction.DOWNLINK, "downlink": Direction.DOWNLINK, "ul": Direction.UPLINK, "uplink": Direction.UPLINK}


class UsageError(Exception):
    """Invalid command-line input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ntnsim", description="O-RAN split and RIC placement simulator for NTN constellations")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    dim = sub.add_parser("dimension", help="Fronthaul/midhaul rates and latency budgets for one cell")
    dim.add_argument("--bandwidth-mhz", type=float, default=100.0)
    dim.add_argument("--scs-khz", type=int, default=60)
    dim.add_argument("--prb", type=int, default=None, help="PRB count (default: table lookup)")
    dim.add_argument("--layers", type=int, default=1)
    dim.add_argument("--modulation", default="64qam", help="qpsk, 16qam, 64qam or 256qam")
    dim.add_argument("--direction", default="dl", choices=sorted(_DIRECTIONS))
    dim.add_argument("--format", default="table", choices=["table", "json"])

    sim = sub.add_parser("simulate", help="Run a scenario and write feasibility reports and events")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", default=None)
    sim.add_argument("--format", default="csv", choices=["csv", "json"])
    sim.add_argument("--seed", type=int, default=None)

    cmp_ = sub.add_parser("compare", help="Side-by-side comparison of split/extension options")
    cmp_.add_argument("scenarios", nargs="+")
    cmp_.add_argument("--options", default=None, help="comma separated, e.g. 1a,2a,3a:ext2")
    cmp_.add_argument("--out", default=None)
    cmp_.add_argument("--workers", type=int, default=None)

    val = sub.add_parser("validate", help="Parse and validate a scenario file")
    val.add_argument("--scenario", default=None)
    val.add_argument("--schema", action="store_true", help="Print the scenario JSON schema")
    return parser


def air_config_from_args(args) -> AirInterfaceConfig:
    if args.bandwidth_mhz <= 0:
        raise UsageError("--bandwidth-mhz must be > 0")
    try:
        prb = args.prb if args.prb is not None else default_prb(args.bandwidth_mhz, args.scs_khz)
        return AirInterfaceConfig(
            bandwidth_mhz=args.bandwidth_mhz,
            scs_khz=args.scs_khz,
            n_prb=prb,
            n_layers=args.layers,
            modulation_order=args.modulation,
            direction=_DIRECTIONS[args.direction],
        )
    except (DimensioningError, ValidationError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_dimension(args) -> int:
    shared = {"air": air_config_from_args(args)}
    create_dimension_flow().run(shared)
    if args.format == "json":
        print(json.dumps(shared["dimension_rows"], indent=2))
    else:
        print(render_text(shared["dimension_table"]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    shared = {
        "scenario_path": args.scenario,
        "seed": args.seed,
        "out_dir": args.out or get_config().output_dir,
        "format": args.format,
    }
    create_simulation_flow().run(shared)
    print(render_text(format_summary(summarize(shared))))
    return EXIT_OK if shared["result"].feasible else EXIT_VIOLATIONS


def cmd_compare(args) -> int:
    options = [o.strip() for o in args.options.split(",") if o.strip()] if args.options else []
    shared = {
        "scenario_paths": args.scenarios,
        "options": options,
        "out_dir": args.out,
        "workers": args.workers,
    }
    asyncio.run(create_compare_flow().run_async(shared))
    print(render_text(shared["comparison_table"]))
    return EXIT_OK if shared["feasible"] else EXIT_VIOLATIONS


def cmd_validate(args) -> int:
    if args.schema:
        print(json.dumps(scenario_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    if not args.scenario:
        raise UsageError("validate needs --scenario or --schema")
    shared = {"scenario_path": args.scenario}
    create_validate_flow().run(shared)
    print(f"ok: {shared['scenario'].name}")
    return EXIT_OK


COMMANDS = {
    "dimension": cmd_dimension,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and map the outcome to an exit status."""
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (NtnSimError, OSError) as exc:
        logger.debug("command failed", exc_info=True, extra={"command": args.command})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
