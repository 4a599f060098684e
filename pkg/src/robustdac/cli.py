"""Command-line front end.

Exit codes: 0 success, 1 invalid scenario or overrides, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import harness
from .scenario import (
    ScenarioError,
    dump_scenario,
    load_scenario,
    benchmark_scenario_dict,
    parse_scenario,
    validate_scenario,
)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

log = logging.getLogger("robustdac")


def _uint(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _layer(text: str) -> float | None:
    if text.lower() == "off":
        return None
    return _positive_float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", type=Path)
    common.add_argument("--out", metavar="DIR", type=Path)
    common.add_argument("--mode", choices=("continuous", "event", "both"), default="event")
    common.add_argument("--step", type=_positive_float, help="integration step h [s]")
    common.add_argument("--duration", type=float, help="simulated horizon [s]")
    common.add_argument("--seed", type=_uint)
    common.add_argument("--force-trigger", action="store_true",
                        help="broadcast every agent at every step")
    common.add_argument("--boundary-layer", type=_layer, metavar="FLOAT",
                        help="replace sgn by a saturated ramp of this width ('off' to disable)")
    common.add_argument("--record-stride", type=_positive_int, metavar="UINT")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="robustdac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run a scenario file and export results")
    sub.add_parser("paper-scenario", parents=[common],
                   help="emit the built-in 10-agent benchmark (stdout or --scenario PATH); run it with --out")
    sub.add_parser("validate", parents=[common], help="check a scenario file")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "h": args.step,
        "duration": args.duration,
        "seed": args.seed,
        "force_trigger": True if args.force_trigger else None,
        "boundary_layer": args.boundary_layer,
        "record_stride": args.record_stride,
    }


def _report(result: harness.RunResult) -> str:
    parts = [f"mode={result.mode}"]
    stats = result.stats
    if stats is not None:
        fractions = ",".join(f"{s.fraction:.3f}" for s in stats)
        mean = sum(s.fraction for s in stats) / len(stats)
        parts.append(f"trigger_fraction_mean={mean:.4f} fractions=[{fractions}]")
    parts.append(f"trailing_error={result.trailing_error():.6g}")
    return " ".join(parts)


def _write(result: harness.RunResult, out: Path) -> None:
    harness.export(result, out)
    try:
        from .plotting import render_figures
    except ImportError as exc:  # figures are optional; data files are not
        log.warning("skipping figures: %s", exc)
        return
    render_figures(result, out)


def _execute(scenario, args: argparse.Namespace) -> int:
    out = args.out if args.out is not None else Path("results")
    results = harness.run(scenario, args.mode)
    if args.mode == "both":
        cont, event = results
        _write(cont, out / "continuous")
        _write(event, out / "event")
        print(_report(cont))
        print(_report(event))
        print(f"max_deviation_between_modes={harness.max_deviation(cont, event):.3e}")
    else:
        _write(results, out)
        print(_report(results))
    return EXIT_OK


def _simulate(args: argparse.Namespace) -> int:
    if args.scenario is None:
        print("error: --scenario PATH is required", file=sys.stderr)
        return EXIT_INVALID
    scenario = load_scenario(args.scenario).with_overrides(**_overrides(args))
    return _execute(scenario, args)


def _benchmark(args: argparse.Namespace) -> int:
    raw = benchmark_scenario_dict(seed=args.seed if args.seed is not None else 42)
    text = dump_scenario(raw)
    if args.scenario is not None:
        args.scenario.parent.mkdir(parents=True, exist_ok=True)
        args.scenario.write_text(text)
    if args.out is None:
        if args.scenario is None:
            sys.stdout.write(text)
        return EXIT_OK
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "scenario.json").write_text(text)
    scenario = parse_scenario(raw).with_overrides(**_overrides(args))
    return _execute(scenario, args)


def _validate(args: argparse.Namespace) -> int:
    import json

    if args.scenario is None:
        print("error: --scenario PATH is required", file=sys.stderr)
        return EXIT_INVALID
    try:
        raw = json.loads(Path(args.scenario).read_text())
    except json.JSONDecodeError as exc:
        print(f"invalid scenario:\n  - {args.scenario}: not valid JSON ({exc})", file=sys.stderr)
        return EXIT_INVALID
    problems, warnings = validate_scenario(raw)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if problems:
        print("invalid scenario:", file=sys.stderr)
        for p in problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.scenario}: valid")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"simulate": _simulate, "paper-scenario": _benchmark, "validate": _validate}
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
