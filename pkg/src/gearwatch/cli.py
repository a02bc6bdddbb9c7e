"""Command-line entry point.

Subcommands: simulate, cluster, monitor, report. All read the same JSON
config; --seed, --jobs and --output override the corresponding keys.
Exit codes: 0 success, 2 configuration, 3 ingestion, 4 modeling,
5 monitoring.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import GearwatchError
from .pipeline import run_cluster, run_monitor, run_report, run_simulate

_COMMANDS = {
    "simulate": (run_simulate, "generate synthetic SCADA streams"),
    "cluster": (run_cluster, "fit and label operating-mode mixtures"),
    "monitor": (run_monitor, "fit ratio models and flag weekly drift"),
    "report": (run_report, "assemble the run report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gearwatch",
        description="Gearbox wear monitoring from wind turbine SCADA data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH",
                       help="JSON run configuration")
        p.add_argument("--seed", type=int, metavar="N",
                       help="override the RNG seed")
        p.add_argument("--jobs", type=int, metavar="N",
                       help="max parallel turbines")
        p.add_argument("--output", metavar="DIR",
                       help="override the output directory")
    return parser


def _describe(command: str, result: dict) -> str:
    if command == "simulate":
        n = len(result.get("turbines", {}))
        return f"simulated {n} turbine(s) into {result['output_dir']}"
    if command == "cluster":
        parts = [
            f"{t['turbine']}: k={t['chosen_k']}"
            for t in result.get("turbines", [])
        ]
        return "clustered " + ", ".join(parts)
    if command == "monitor":
        lines = []
        for tid in sorted(result.get("turbines", {})):
            entry = result["turbines"][tid]
            n_flags = len(entry.get("flags", []))
            lines.append(f"{tid}: {entry['status']}, {n_flags} flag(s)")
        return "monitored " + "; ".join(lines)
    return "report written"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {
        "seed": args.seed,
        "jobs": args.jobs,
        "output_dir": args.output,
    }
    try:
        cfg = load_config(args.config, overrides)
        runner, _ = _COMMANDS[args.command]
        result = runner(cfg)
    except GearwatchError as exc:
        print(f"gearwatch: error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(_describe(args.command, result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
