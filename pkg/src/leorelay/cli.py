"""Command-line front end: run scenarios, compare schemes, sweep alpha.

Exit codes: 0 for a clean run, 1 when any constraint audit recorded a
violation, 2 for configuration or I/O problems.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .harness import MismatchedScenarios, compare, run, sweep_alpha
from .scenario import SCHEMES, ConfigError, load_scenario

OUTPUT_ENV = "LEORELAY_OUTPUT"


def _output_dir(cli_value: Path | None) -> Path | None:
    if cli_value is not None:
        return cli_value
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else None


def _print_seed_lines(result) -> None:
    for s in result.seed_summaries:
        mean = "n/a" if s.latency_mean is None else f"{s.latency_mean:.3f}"
        iqr = "n/a" if s.latency_iqr is None else f"{s.latency_iqr:.3f}"
        print(
            f"[{s.scheme}] seed {s.seed}: pairs={s.pair_count} "
            f"mean={mean} ms iqr={iqr} ms infeasible={s.infeasible_pairs} "
            f"failures={s.allocation_failures} violations={s.violations}"
        )


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.scheme:
        scenario = scenario.with_scheme(args.scheme)
    result = run(scenario, output_dir=_output_dir(args.output), seeds=args.seed)
    _print_seed_lines(result)
    print(f"outputs in {result.out_dir / scenario.scheme}")
    return 1 if result.total_violations else 0


def _cmd_compare(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    schemes = args.schemes or list(SCHEMES)
    if "spacemeta" not in schemes:
        schemes = ["spacemeta"] + schemes
    scenarios = [scenario.with_scheme(s) for s in schemes]
    report, runs = compare(scenarios, output_dir=_output_dir(args.output))
    violations = 0
    for result in runs.values():
        _print_seed_lines(result)
        violations += result.total_violations
    for scheme, verdict in report["vs"].items():
        mean_r = verdict["mean_latency_reduction_pct"]
        iqr_r = verdict["iqr_reduction_pct"]
        print(
            f"spacemeta vs {scheme}: mean latency reduced "
            f"{mean_r['mean']:.2f}% (std {mean_r['std']:.2f}), "
            f"IQR reduced {iqr_r['mean']:.2f}% (std {iqr_r['std']:.2f})"
        )
    return 1 if violations else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    report = sweep_alpha(scenario, alphas=args.alphas, output_dir=_output_dir(args.output))
    violations = 0
    for point in report["points"]:
        for row in point["per_seed"]:
            violations += row["violations"]
        means = [r["latency_mean"] for r in point["per_seed"] if r["latency_mean"] is not None]
        spreads = [
            r["dispersion_mean"] for r in point["per_seed"] if r["dispersion_mean"] is not None
        ]
        mean = f"{sum(means) / len(means):.3f}" if means else "n/a"
        spread = f"{sum(spreads) / len(spreads):.3f}" if spreads else "n/a"
        print(f"alpha={point['alpha']:g}: mean={mean} ms dispersion={spread} ms")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leorelay",
        description="Slot-based LEO relay selection and flow allocation runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario", type=Path, help="TOML scenario file")
    p_run.add_argument("--seed", type=int, action="append", help="override the seed list")
    p_run.add_argument("--scheme", choices=SCHEMES, help="override the scheme")
    p_run.add_argument("--output", type=Path, help=f"output root (or ${OUTPUT_ENV})")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="paired runs of several schemes")
    p_cmp.add_argument("scenario", type=Path)
    p_cmp.add_argument(
        "--schemes", nargs="+", choices=SCHEMES, help="schemes to pair (default: all)"
    )
    p_cmp.add_argument("--output", type=Path, help=f"output root (or ${OUTPUT_ENV})")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep-alpha", help="re-run at several alpha weights")
    p_sweep.add_argument("scenario", type=Path)
    p_sweep.add_argument(
        "--alphas", nargs="+", type=float, default=[1.0, 5.0, 10.0, 20.0]
    )
    p_sweep.add_argument("--output", type=Path, help=f"output root (or ${OUTPUT_ENV})")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MismatchedScenarios) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
