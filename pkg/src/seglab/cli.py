"""Command-line entry points.

Subcommands map one-to-one onto the runner experiment families, plus a
standalone `shoot` mode for quick boundary-value enumeration without a
scenario file. Exit codes: 0 all checks passed, 1 a run or check failed,
2 the scenario or arguments were invalid.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .evolve import BlowupError
from .geometry import Grid
from .kinetics import Kinetics
from .runner import RunReport, run_evolve, run_genericity, run_spectrum, run_stationary
from .scenario import Scenario, ScenarioError, load_scenario
from .stationary import NonConvergenceError, shoot_enumerate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_BAD_CONFIG = 2
DEFAULT_OUT_DIR = "seglab_out"


def resolve_out_dir(cli_value: str | None) -> Path:
    """--out-dir beats the SEGLAB_OUT_DIR environment variable beats ./seglab_out."""
    if cli_value is not None:
        return Path(cli_value)
    env = os.environ.get("SEGLAB_OUT_DIR")
    if env:
        return Path(env)
    return Path(DEFAULT_OUT_DIR)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("scenario", type=Path, help="scenario YAML file")
    parser.add_argument("--out-dir", default=None, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel worker processes for per-k runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seglab",
        description="Numerical laboratory for two-species competition-diffusion "
                    "systems with strong interaction.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    runs = {
        "evolve": "time-integrate the coupled system over the scenario's k values",
        "stationary": "enumerate limit solutions and build stationary pairs per k",
        "genericity": "perturb boundary data and certify non-degeneracy",
        "spectrum": "compute the principal eigenvalue of each limit linearization",
    }
    for name, help_text in runs.items():
        _add_run_options(sub.add_parser(name, help=help_text))

    shoot = sub.add_parser(
        "shoot", help="enumerate solutions of the scalar limit problem directly")
    shoot.add_argument("--a", type=float, required=True, help="left boundary value")
    shoot.add_argument("--b", type=float, required=True, help="right boundary value")
    shoot.add_argument("--slope-lo", type=float, default=-50.0)
    shoot.add_argument("--slope-hi", type=float, default=50.0)
    shoot.add_argument("--n-scan", type=int, default=2000)
    shoot.add_argument("--n-interior", type=int, default=400)
    shoot.add_argument("--alpha", type=float, default=1.0)
    return parser


_RUNNERS = {
    "evolve": run_evolve,
    "stationary": run_stationary,
    "genericity": run_genericity,
    "spectrum": run_spectrum,
}


def _load_scenario(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        raw = dict(scenario.raw)
        raw["seed"] = args.seed
        scenario = Scenario.from_dict(raw)
    return scenario


def _print_report(report: RunReport) -> None:
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        line = f"[{status}] {check.name}"
        if check.detail:
            line += f": {check.detail}"
        print(line)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{report.command} ({report.scenario}): {verdict} "
          f"in {report.wall_clock_s:.1f} s")


def _run_shoot(args: argparse.Namespace) -> int:
    grid = Grid(args.n_interior)
    kin = Kinetics.logistic(alpha=args.alpha)
    solutions = shoot_enumerate(
        grid, kin, args.a, args.b, args.slope_lo, args.slope_hi, args.n_scan)
    print(f"{len(solutions)} solution(s) for boundary values "
          f"({args.a:g}, {args.b:g}), alpha={args.alpha:g}")
    for i, sol in enumerate(solutions):
        full = sol.w.full_values()
        print(f"  [{i}] slope={sol.slope:+.12g} residual={sol.residual_l2:.3e} "
              f"iters={sol.newton_iters} range=[{full.min():.6g}, {full.max():.6g}]")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s")

    if args.command == "shoot":
        try:
            return _run_shoot(args)
        except (NonConvergenceError, ValueError) as exc:
            logger.error("shoot failed: %s", exc)
            return EXIT_RUN_FAILED

    try:
        scenario = _load_scenario(args)
    except ScenarioError as exc:
        logger.error("invalid scenario: %s", exc)
        return EXIT_BAD_CONFIG
    if args.jobs < 1:
        logger.error("--jobs must be a positive integer, got %d", args.jobs)
        return EXIT_BAD_CONFIG

    out_dir = resolve_out_dir(args.out_dir)
    try:
        report = _RUNNERS[args.command](scenario, out_dir, jobs=args.jobs)
    except (BlowupError, NonConvergenceError) as exc:
        logger.error("%s run aborted: %s", args.command, exc)
        return EXIT_RUN_FAILED

    _print_report(report)
    return EXIT_OK if report.passed else EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
