"""Experiment orchestration: k-sweeps, enumeration runs, reports and CSVs.

Each run_* function executes one experiment family over a Scenario, writes
deterministic CSV artifacts into an output directory, and returns a RunReport
whose checks decide the process exit code. CSV content depends only on the
scenario (and its seed), never on timing; wall-clock goes into the JSON
report only.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import DiagnosticSnapshot
from .evolve import EvolveResult, evolve_to, initial_state
from .geometry import Field, l2_norm
from .scenario import Scenario
from .spectra import (assemble_linearization, default_lambda_tol, eigen_residual,
                      genericity_sweep, smallest_magnitude_eigenvalue)
from .stationary import (NonConvergenceError, local_uniqueness_probe,
                         segregated_pair, shoot_enumerate, solve_Pk_stationary,
                         solve_oneeq_monotone)

logger = logging.getLogger(__name__)

# Diagnostics suprema are taken over snapshot times t >= this transient cutoff.
SUP_T0 = 0.5
BOUNDS_TOL = 1e-12
CANCEL_TOL = 1e-12
ORDER_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-8
MIN_LAMBDA_REPORT = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class RunReport:
    """Everything one experiment produced: summary rows, checks, artifacts."""

    scenario: str
    command: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    out_files: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))
        level = logging.INFO if passed else logging.ERROR
        logger.log(level, "check %-32s %s  %s", name, "PASS" if passed else "FAIL", detail)

    def write_json(self, path: Path) -> None:
        payload = {
            "scenario": self.scenario,
            "command": self.command,
            "seed": self.seed,
            "version": self.version,
            "passed": self.passed,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "checks": [asdict(c) for c in self.checks],
            "rows": self.rows,
            "out_files": self.out_files,
        }
        path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    """Deterministic CSV: fixed column order, repr-formatted floats, LF endings."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _pyval(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def _enumerate_limit_solutions(scenario: Scenario):
    a, b = scenario.bc_w
    return shoot_enumerate(
        scenario.grid, scenario.kin, a, b,
        scenario.shooting.slope_lo, scenario.shooting.slope_hi,
        scenario.shooting.n_scan, refine_tol=scenario.tolerances.newton,
    )


def _evolve_worker(payload: tuple[dict, float, list[Field]]) -> EvolveResult:
    raw, k, targets = payload
    scenario = Scenario.from_dict(raw)
    spec = scenario.problem_for(k)
    return evolve_to(initial_state(spec), spec, scenario.evolve, targets)


def run_evolve(scenario: Scenario, out_dir: Path, jobs: int = 1) -> RunReport:
    """Time-integrate the system for every k; emit trajectories and a summary."""
    t_start = time.perf_counter()
    report = RunReport(scenario=scenario.name, command="evolve", seed=scenario.seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    solutions = _enumerate_limit_solutions(scenario)
    targets = [s.w for s in solutions]
    logger.info("limit enumeration found %d solution(s)", len(solutions))

    payloads = [(scenario.raw, k, targets) for k in scenario.k_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evolve_worker, payloads))
    else:
        results = [_evolve_worker(p) for p in payloads]

    header = DiagnosticSnapshot.column_names()
    sup_rows: list[dict] = []
    for k, res in sorted(zip(scenario.k_values, results), key=lambda p: p[0]):
        traj_path = out_dir / f"{scenario.name}_evolve_k{k:g}.csv"
        write_csv(traj_path, header, [snap.row() for snap in res.trajectory])
        report.out_files.append(traj_path.name)

        # If the run froze (steady) before SUP_T0, the terminal snapshot stands
        # in for every later time, so suprema over t >= SUP_T0 reduce to it.
        late = [s for s in res.trajectory if s.t >= SUP_T0] or res.trajectory[-1:]
        terminal = res.trajectory[-1] if res.trajectory else None
        row = {
            "k": k,
            "dt": res.dt,
            "n_steps": res.n_steps,
            "steady": res.steady,
            "t_steady": res.t_steady,
            "min_u": res.min_u,
            "max_u": res.max_u,
            "min_v": res.min_v,
            "max_v": res.max_v,
            "max_coupling_defect": res.max_coupling_defect,
            "final_rate": res.final_rate,
            "sup_seg_pointwise": max(s.seg_pointwise for s in late) if late else None,
            "sup_proj_error": max(s.proj_error for s in late) if late else None,
            "sup_remainder_R": max(s.remainder_R_l2 for s in late) if late else None,
        }
        for name in header:
            row[f"terminal_{name}"] = getattr(terminal, name) if terminal else None
        sup_rows.append({key: _pyval(val) for key, val in row.items()})
    report.rows = sup_rows

    summary_path = out_dir / f"{scenario.name}_evolve_summary.csv"
    columns = list(sup_rows[0].keys())
    write_csv(summary_path, columns, [[r[c] for c in columns] for r in sup_rows])
    report.out_files.append(summary_path.name)

    box = max(1.0, scenario.m1.full_values().max(), scenario.m2.full_values().max())
    worst_low = min(min(r["min_u"], r["min_v"]) for r in sup_rows)
    worst_high = max(max(r["max_u"], r["max_v"]) for r in sup_rows)
    report.check(
        "bounds_box", worst_low >= -BOUNDS_TOL and worst_high <= box + BOUNDS_TOL,
        f"min {worst_low:.3e}, max {worst_high:.6f}, M {box:.3f}")
    worst_defect = max(r["max_coupling_defect"] for r in sup_rows)
    report.check(
        "coupling_cancellation", worst_defect <= CANCEL_TOL,
        f"max |alpha*C_u - C_v| = {worst_defect:.3e}")
    finite = all(
        np.isfinite([v for v in r.values() if isinstance(v, float)]).all()
        for r in sup_rows)
    report.check("rows_finite", finite, "")
    report.check(
        "steady_every_k", all(r["steady"] for r in sup_rows),
        ", ".join(f"k={r['k']:g}: t={r['t_steady']}" for r in sup_rows))

    seg = [r["sup_seg_pointwise"] for r in sup_rows]
    report.check(
        "segregation_monotone_in_k",
        all(b <= a + 1e-12 for a, b in zip(seg, seg[1:])),
        f"sup min(u,v) over region: {[round(s, 6) for s in seg]}")
    proj = [r["sup_proj_error"] for r in sup_rows]
    rem = [r["sup_remainder_R"] for r in sup_rows]
    report.check(
        "convergence_decreasing_in_k",
        all(b < a for a, b in zip(proj, proj[1:])) and all(b < a for a, b in zip(rem, rem[1:])),
        f"proj {[round(p, 5) for p in proj]}, remainder {[round(r_, 5) for r_ in rem]}")
    if targets:
        dists = [r["terminal_dist_to_limit"] for r in sup_rows]
        report.check(
            "dist_to_limit_decreasing",
            all(d is not None for d in dists) and all(b < a for a, b in zip(dists, dists[1:])),
            f"terminal distances {[None if d is None else round(d, 6) for d in dists]}")
    else:
        report.check("dist_to_limit_decreasing", False, "no limit solutions enumerated")

    report.wall_clock_s = time.perf_counter() - t_start
    report_path = out_dir / f"{scenario.name}_evolve_report.json"
    report.write_json(report_path)
    report.out_files.append(report_path.name)
    return report


def run_stationary(scenario: Scenario, out_dir: Path, jobs: int = 1) -> RunReport:
    """Enumerate limit solutions, certify them, and build stationary pairs per k."""
    t_start = time.perf_counter()
    report = RunReport(scenario=scenario.name, command="stationary", seed=scenario.seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    solutions = _enumerate_limit_solutions(scenario)
    report.check("solutions_found", len(solutions) >= 1,
                 f"{len(solutions)} solution(s) at bc {scenario.bc_w}")

    sol_rows = []
    all_nondeg = bool(solutions)
    max_eig_resid = 0.0
    for i, sol in enumerate(solutions):
        op = assemble_linearization(sol, scenario.kin)
        lam, phi = smallest_magnitude_eigenvalue(op)
        resid = eigen_residual(op, lam, phi)
        max_eig_resid = max(max_eig_resid, resid)
        tol_lambda = default_lambda_tol(op)
        nondeg = abs(lam) > tol_lambda
        all_nondeg = all_nondeg and nondeg
        full = sol.w.full_values()
        sol_rows.append({
            "index": i,
            "slope": _pyval(sol.slope),
            "residual_l2": _pyval(sol.residual_l2),
            "newton_iters": sol.newton_iters,
            "lambda_min": _pyval(lam),
            "eigen_residual": _pyval(resid),
            "tol_lambda": _pyval(tol_lambda),
            "nondegenerate": nondeg,
            "decreasing": bool(np.all(np.diff(full) < 0.0)),
            "w_min": _pyval(full.min()),
            "w_max": _pyval(full.max()),
        })
    if solutions:
        sol_path = out_dir / f"{scenario.name}_solutions.csv"
        cols = list(sol_rows[0].keys())
        write_csv(sol_path, cols, [[r[c] for c in cols] for r in sol_rows])
        report.out_files.append(sol_path.name)
    report.check("solutions_nondegenerate", all_nondeg,
                 f"max eigen residual {max_eig_resid:.2e}")
    report.check("eigen_residuals", bool(solutions) and max_eig_resid <= EIG_RESIDUAL_TOL,
                 f"{max_eig_resid:.2e} <= {EIG_RESIDUAL_TOL:g}")

    k_rows: list[dict] = []
    if solutions:
        w0 = solutions[0].w
        grid = scenario.grid
        kin = scenario.kin
        lower_vals, _ = segregated_pair(w0, kin)
        m1_bc = (scenario.m1.left, scenario.m1.right)
        u_by_k: list[np.ndarray] = []
        for k in scenario.k_values:
            spec = scenario.problem_for(k)
            row: dict = {"k": k}
            try:
                u_k = solve_oneeq_monotone(
                    k, w0, kin, m1_bc, tol=scenario.tolerances.oneeq)
                v_k = Field(grid, kin.alpha * u_k.values - w0.values,
                            scenario.m2.left, scenario.m2.right)
                row["dist_to_lower"] = _pyval(
                    l2_norm(u_k - Field(grid, lower_vals, u_k.left, u_k.right)))
                row["v_min"] = _pyval(v_k.values.min())
                u_by_k.append(u_k.values)
                pair = solve_Pk_stationary(
                    spec, (u_k, v_k), tol=scenario.tolerances.pair)
                row["pair_residual_u"], row["pair_residual_v"] = map(_pyval, pair.residuals)
                row["pair_newton_iters"] = pair.newton_iters
                row["pair_dist_to_seed"] = _pyval(l2_norm(pair.u - u_k) + l2_norm(pair.v - v_k))
                probe = local_uniqueness_probe(
                    spec, w0, n_seeds=scenario.probes.n_seeds,
                    radius=scenario.probes.radius, tol=scenario.tolerances.pair,
                    seed=scenario.seed)
                row["distinct_limits"] = probe.n_distinct
                row["probe_converged"] = probe.n_converged
                row["probe_max_residual"] = _pyval(probe.max_residual)
                row["error"] = None
            except NonConvergenceError as exc:
                row["error"] = str(exc)
                logger.error("stationary pipeline failed at k=%g: %s", k, exc)
            k_rows.append(row)

        columns = ["k", "dist_to_lower", "v_min", "pair_residual_u", "pair_residual_v",
                   "pair_newton_iters", "pair_dist_to_seed", "distinct_limits",
                   "probe_converged", "probe_max_residual", "error"]
        summary_path = out_dir / f"{scenario.name}_stationary_summary.csv"
        write_csv(summary_path, columns,
                  [[row.get(c) for c in columns] for row in k_rows])
        report.out_files.append(summary_path.name)

        clean = [row for row in k_rows if row.get("error") is None]
        report.check("pipeline_errors", len(clean) == len(k_rows),
                     f"{len(k_rows) - len(clean)} of {len(k_rows)} k-runs failed")
        if len(u_by_k) == len(scenario.k_values):
            worst = 0.0
            for a, b in zip(u_by_k, u_by_k[1:]):
                worst = max(worst, float(np.max(b - a)))
            report.check("u_monotone_in_k", worst <= ORDER_TOL,
                         f"max node-wise increase {worst:.2e}")
            dists = [row["dist_to_lower"] for row in clean]
            report.check("u_converges_to_lower",
                         all(b < a for a, b in zip(dists, dists[1:])),
                         f"{[round(d, 5) for d in dists]}")
        if clean:
            report.check("unique_limit_at_largest_k",
                         clean[-1]["k"] == scenario.k_values[-1]
                         and clean[-1]["distinct_limits"] == 1,
                         f"distinct limits {clean[-1].get('distinct_limits')}")
    report.rows = sol_rows + k_rows

    report.wall_clock_s = time.perf_counter() - t_start
    report_path = out_dir / f"{scenario.name}_stationary_report.json"
    report.write_json(report_path)
    report.out_files.append(report_path.name)
    return report


def run_genericity(scenario: Scenario, out_dir: Path, jobs: int = 1) -> RunReport:
    """Random boundary perturbation sweep with non-degeneracy certification."""
    t_start = time.perf_counter()
    report = RunReport(scenario=scenario.name, command="genericity", seed=scenario.seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    sweep = genericity_sweep(
        scenario.grid, scenario.bc_w, scenario.probes.n_perturb,
        scenario.probes.magnitude, scenario.kin, seed=scenario.seed,
        slope_lo=scenario.shooting.slope_lo, slope_hi=scenario.shooting.slope_hi,
        n_scan=scenario.probes.sweep_n_scan,
    )
    row = {
        "n_perturb": sweep.n_perturb,
        "n_evaluated": sweep.n_evaluated,
        "n_all_nondegenerate": sweep.n_all_nondegenerate,
        "fraction_nondegenerate": _pyval(sweep.fraction_nondegenerate),
        "total_solutions": sweep.total_solutions,
        "min_abs_lambda": _pyval(sweep.min_abs_lambda),
        "n_failures": len(sweep.failures),
    }
    report.rows = [row]
    csv_path = out_dir / f"{scenario.name}_genericity.csv"
    cols = list(row.keys())
    write_csv(csv_path, cols, [[row[c] for c in cols]])
    report.out_files.append(csv_path.name)

    report.check("all_perturbations_evaluated",
                 sweep.n_evaluated == sweep.n_perturb,
                 f"{sweep.n_evaluated}/{sweep.n_perturb} ({len(sweep.failures)} failures)")
    report.check("fraction_nondegenerate_is_one",
                 sweep.n_evaluated > 0 and sweep.fraction_nondegenerate == 1.0,
                 f"fraction {sweep.fraction_nondegenerate}")
    report.check("min_abs_lambda_reported",
                 sweep.min_abs_lambda > MIN_LAMBDA_REPORT,
                 f"min |lambda| = {sweep.min_abs_lambda:.4e}")

    report.wall_clock_s = time.perf_counter() - t_start
    report_path = out_dir / f"{scenario.name}_genericity_report.json"
    report.write_json(report_path)
    report.out_files.append(report_path.name)
    return report


def run_spectrum(scenario: Scenario, out_dir: Path, jobs: int = 1) -> RunReport:
    """Certify the linearization spectrum of every enumerated limit solution."""
    t_start = time.perf_counter()
    report = RunReport(scenario=scenario.name, command="spectrum", seed=scenario.seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    solutions = _enumerate_limit_solutions(scenario)
    report.check("solutions_found", len(solutions) >= 1, f"{len(solutions)} solution(s)")
    rows = []
    worst_resid = 0.0
    all_nondeg = bool(solutions)
    for i, sol in enumerate(solutions):
        op = assemble_linearization(sol, scenario.kin)
        lam, phi = smallest_magnitude_eigenvalue(op)
        resid = eigen_residual(op, lam, phi)
        worst_resid = max(worst_resid, resid)
        tol_lambda = default_lambda_tol(op)
        nondeg = abs(lam) > tol_lambda
        all_nondeg = all_nondeg and nondeg
        rows.append({
            "index": i,
            "lambda_min": _pyval(lam),
            "eigen_residual": _pyval(resid),
            "tol_lambda": _pyval(tol_lambda),
            "nondegenerate": nondeg,
            "kink_nodes": op.kink_nodes,
            "potential_max": _pyval(np.max(op.potential)),
            "potential_min": _pyval(np.min(op.potential)),
        })
    report.rows = rows
    if rows:
        csv_path = out_dir / f"{scenario.name}_spectrum.csv"
        cols = list(rows[0].keys())
        write_csv(csv_path, cols, [[r[c] for c in cols] for r in rows])
        report.out_files.append(csv_path.name)
    report.check("eigen_residuals", bool(rows) and worst_resid <= EIG_RESIDUAL_TOL,
                 f"max {worst_resid:.2e}")
    report.check("solutions_nondegenerate", all_nondeg, "")

    report.wall_clock_s = time.perf_counter() - t_start
    report_path = out_dir / f"{scenario.name}_spectrum_report.json"
    report.write_json(report_path)
    report.out_files.append(report_path.name)
    return report
