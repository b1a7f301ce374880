"""Stationary solvers: the scalar limit equation, shooting, and the pair system.

Four solvers live here.

* solve_S_newton: damped semismooth Newton for the limit equation
  w_xx + h(w) = 0 with Dirichlet data; the linearization uses the node-wise
  almost-everywhere derivative h'(w), which is the standard semismooth
  treatment of the kink of h at w = 0.
* shoot_enumerate: enumerates solutions of the same equation by shooting from
  x = 0, scanning the initial slope, bracketing sign changes of the endpoint
  miss w(1) - b, bisecting, and polishing each root with solve_S_newton.
* solve_oneeq_monotone: the auxiliary single equation
  -u_xx = f(w0^+/alpha) - k*u*(alpha*u - w0) with u = m1 on the boundary,
  solved by a shifted monotone iteration descending from a constant upper
  solution; iterates stay between w0^+/alpha and that constant.
* solve_Pk_stationary: damped Newton on the coupled stationary system
  -u_xx = f(u) - k*u*v, -v_xx = g(v) - alpha*k*u*v, with the two unknowns
  interleaved so the Jacobian is a bandwidth-2 banded matrix.

local_uniqueness_probe stress-tests the uniqueness of the pair near the
segregated profile by re-solving from randomized seeds and counting distinct
limits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._stepper import orbit_run, scan_endpoints
from .geometry import Field, Grid, l2_norm, linf_norm
from .kinetics import Kinetics

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
# Profiles closer than this in L-infinity are considered the same solution.
DEDUPE_TOL = 1e-8
# Monotone-iteration restarts with doubled shift before giving up.
MAX_SHIFT_RETRIES = 6

_ESCAPE = 1e3
_RK_PER_CELL = 4


class NonConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations or damping could not reduce the residual."""

    def __init__(self, message: str, last=None, residual: float = np.nan,
                 iterations: int = 0) -> None:
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class StationarySolution:
    """A solution of w_xx + h(w) = 0 with its residual certificate."""

    w: Field
    residual_l2: float
    newton_iters: int
    slope: float | None = None

    @property
    def bc(self) -> tuple[float, float]:
        return (self.w.left, self.w.right)


@dataclass(frozen=True)
class StationaryPair:
    """A nonnegative stationary pair of the coupled system at strength k."""

    u: Field
    v: Field
    k: float
    residuals: tuple[float, float]
    newton_iters: int


@dataclass(frozen=True)
class UniquenessReport:
    """Outcome of local_uniqueness_probe."""

    n_seeds: int
    n_converged: int
    n_distinct: int
    max_residual: float
    failures: tuple[str, ...]
    representatives: tuple[StationaryPair, ...]


def newton_system(w: Field, kin: Kinetics) -> tuple[np.ndarray, np.ndarray]:
    """Residual w_xx + h(w) and banded Jacobian (diag offsets +1, 0, -1)."""
    h = w.grid.h
    n = w.grid.n_interior
    full = w.full_values()
    resid = (full[:-2] - 2.0 * full[1:-1] + full[2:]) / h ** 2 + kin.h(w.values)
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0 / h ** 2
    ab[1, :] = -2.0 / h ** 2 + kin.h_prime(w.values)
    ab[2, :-1] = 1.0 / h ** 2
    return resid, ab


def solve_S_newton(
    init: Field,
    kin: Kinetics,
    bc: tuple[float, float] | None = None,
    tol: float = 1e-9,
    max_iters: int = 50,
) -> StationarySolution:
    """Damped semismooth Newton for the limit equation from the given initial field.

    bc, when given, must agree with the boundary slots of init (the slots are
    the single source of truth). Damping halves the step until the residual
    norm decreases; failure to decrease within MAX_HALVINGS halvings or to
    reach tol within max_iters raises NonConvergenceError carrying the last
    iterate.
    """
    if bc is not None and (bc[0] != init.left or bc[1] != init.right):
        raise ValueError(
            f"bc {bc} disagrees with the boundary slots ({init.left}, {init.right})"
        )
    w = init.copy()
    resid, ab = newton_system(w, kin)
    rnorm = l2_norm(w.with_values(resid))
    for it in range(max_iters + 1):
        if rnorm <= tol:
            return StationarySolution(w=w, residual_l2=rnorm, newton_iters=it)
        if it == max_iters:
            break
        try:
            delta = scipy.linalg.solve_banded((1, 1), ab, resid)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(
                f"singular Jacobian at iteration {it} (near-degenerate solution?)",
                last=w, residual=rnorm, iterations=it,
            ) from exc
        s = 1.0
        for _ in range(MAX_HALVINGS):
            trial = w.with_values(w.values - s * delta)
            t_resid, t_ab = newton_system(trial, kin)
            t_rnorm = l2_norm(trial.with_values(t_resid))
            if t_rnorm < rnorm:
                w, resid, ab, rnorm = trial, t_resid, t_ab, t_rnorm
                break
            s *= 0.5
        else:
            raise NonConvergenceError(
                f"damping stalled at iteration {it} with residual {rnorm:.3e}",
                last=w, residual=rnorm, iterations=it,
            )
    raise NonConvergenceError(
        f"no convergence in {max_iters} iterations (residual {rnorm:.3e} > tol {tol:.1e})",
        last=w, residual=rnorm, iterations=max_iters,
    )


def integrate_orbit(
    kin: Kinetics, a: float, slope: float, n_steps: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 integration of w'' = -h(w) from (w, w')(0) = (a, slope) across [0, 1].

    Returns (x, w, w') sampled at the n_steps+1 integration nodes; entries
    turn NaN after the trajectory escapes |w| > _ESCAPE.
    """
    x = np.linspace(0.0, 1.0, n_steps + 1)
    coeffs = _descending_pair(kin)
    if coeffs is not None:
        w_path, s_path = orbit_run(
            float(a), float(slope), n_steps, coeffs[0], coeffs[1],
            kin.alpha, _ESCAPE)
        return x, w_path, s_path
    dx = 1.0 / n_steps
    w_path = np.empty(n_steps + 1)
    s_path = np.empty(n_steps + 1)
    w_arr = np.array([a], dtype=float)
    s_arr = np.array([slope], dtype=float)
    w_path[0] = a
    s_path[0] = slope
    for i in range(n_steps):
        w_arr, s_arr = _rk4_step(kin, w_arr, s_arr, dx)
        w_path[i + 1] = w_arr[0]
        s_path[i + 1] = s_arr[0]
    return x, w_path, s_path


def _descending_pair(kin: Kinetics) -> tuple[np.ndarray, np.ndarray] | None:
    """Descending reaction coefficients for the compiled orbit kernels."""
    if kin.f_coeffs is None or kin.g_coeffs is None:
        return None
    return (np.ascontiguousarray(kin.f_coeffs[::-1], dtype=float),
            np.ascontiguousarray(kin.g_coeffs[::-1], dtype=float))


def _rk4_step(
    kin: Kinetics, w: np.ndarray, s: np.ndarray, dx: float
) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(over="ignore", invalid="ignore"):
        k1w = s
        k1s = -kin.h(w)
        k2w = s + 0.5 * dx * k1s
        k2s = -kin.h(w + 0.5 * dx * k1w)
        k3w = s + 0.5 * dx * k2s
        k3s = -kin.h(w + 0.5 * dx * k2w)
        k4w = s + dx * k3s
        k4s = -kin.h(w + dx * k3w)
        w_new = w + (dx / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        s_new = s + (dx / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        bad = ~np.isfinite(w_new) | (np.abs(w_new) > _ESCAPE)
        if bad.any():
            w_new = np.where(bad, np.nan, w_new)
            s_new = np.where(bad, np.nan, s_new)
    return w_new, s_new


def _endpoints(kin: Kinetics, a: float, slopes: np.ndarray, n_steps: int) -> np.ndarray:
    """Vectorized endpoint values w(1) for a batch of initial slopes."""
    coeffs = _descending_pair(kin)
    if coeffs is not None:
        return scan_endpoints(
            float(a), np.ascontiguousarray(slopes, dtype=float), n_steps,
            coeffs[0], coeffs[1], kin.alpha, _ESCAPE)
    dx = 1.0 / n_steps
    w = np.full(slopes.shape, a, dtype=float)
    s = slopes.astype(float).copy()
    for _ in range(n_steps):
        w, s = _rk4_step(kin, w, s, dx)
    return w


def shooting_brackets(
    kin: Kinetics,
    a: float,
    b: float,
    slope_lo: float,
    slope_hi: float,
    n_scan: int,
    n_steps: int,
) -> list[tuple[float, float]]:
    """Slope intervals on which the endpoint miss w(1) - b changes sign.

    Escaped samples (NaN endpoint) are excluded from bracketing; an exact
    zero of the miss yields a degenerate bracket.
    """
    slopes = np.linspace(slope_lo, slope_hi, n_scan)
    miss = _endpoints(kin, a, slopes, n_steps) - b
    brackets: list[tuple[float, float]] = []
    for i in range(n_scan - 1):
        m0, m1 = miss[i], miss[i + 1]
        if not (np.isfinite(m0) and np.isfinite(m1)):
            continue
        if m0 == 0.0:
            brackets.append((slopes[i], slopes[i]))
        elif m0 * m1 < 0.0:
            brackets.append((slopes[i], slopes[i + 1]))
    if np.isfinite(miss[-1]) and miss[-1] == 0.0:
        brackets.append((slopes[-1], slopes[-1]))
    return brackets


def shoot_enumerate(
    grid: Grid,
    kin: Kinetics,
    a: float,
    b: float,
    slope_lo: float = -50.0,
    slope_hi: float = 50.0,
    n_scan: int = 2000,
    refine_tol: float = 1e-9,
) -> list[StationarySolution]:
    """All isolated solutions of w_xx + h(w) = 0 with w(0) = a, w(1) = b.

    Scans n_scan initial slopes across [slope_lo, slope_hi], brackets the
    endpoint miss, bisects each bracket, samples the orbit on the grid and
    polishes with solve_S_newton. Near-identical profiles are merged.
    """
    if slope_lo >= slope_hi:
        raise ValueError(f"slope range is empty: [{slope_lo}, {slope_hi}]")
    if n_scan < 16:
        raise ValueError(f"n_scan must be >= 16, got {n_scan}")
    n_steps = _RK_PER_CELL * (grid.n_interior + 1)
    solutions: list[StationarySolution] = []
    for s_lo, s_hi in shooting_brackets(kin, a, b, slope_lo, slope_hi, n_scan, n_steps):
        slope = _bisect_slope(kin, a, b, s_lo, s_hi, n_steps)
        if slope is None:
            continue
        _, w_path, _ = integrate_orbit(kin, a, slope, n_steps)
        init = Field(grid, w_path[_RK_PER_CELL:-1:_RK_PER_CELL], a, b)
        try:
            sol = solve_S_newton(init, kin, tol=refine_tol)
        except NonConvergenceError as exc:
            logger.warning("refinement failed for slope %.6g: %s", slope, exc)
            continue
        if any(linf_norm(sol.w - kept.w) < max(10.0 * refine_tol, DEDUPE_TOL)
               for kept in solutions):
            continue
        solutions.append(StationarySolution(
            w=sol.w, residual_l2=sol.residual_l2,
            newton_iters=sol.newton_iters, slope=slope,
        ))
    return solutions


def _bisect_slope(
    kin: Kinetics, a: float, b: float, s_lo: float, s_hi: float, n_steps: int
) -> float | None:
    if s_lo == s_hi:
        return s_lo
    m_lo = _endpoints(kin, a, np.array([s_lo]), n_steps)[0] - b
    for _ in range(100):
        s_mid = 0.5 * (s_lo + s_hi)
        if s_hi - s_lo < 1e-13 * max(1.0, abs(s_mid)):
            return s_mid
        m_mid = _endpoints(kin, a, np.array([s_mid]), n_steps)[0] - b
        if not np.isfinite(m_mid):
            logger.warning("escaped orbit inside bracket near slope %.6g", s_mid)
            return None
        if m_mid == 0.0:
            return s_mid
        if m_lo * m_mid < 0.0:
            s_hi = s_mid
        else:
            s_lo, m_lo = s_mid, m_mid
    return 0.5 * (s_lo + s_hi)


def conserved_quantity(w_val, w_slope, kin: Kinetics):
    """(1/2) * w_slope^2 + H(w_val), constant along orbits of w'' = -h(w)."""
    return 0.5 * np.asarray(w_slope, dtype=float) ** 2 + kin.H(w_val)


def solve_oneeq_monotone(
    k: float,
    w0: Field,
    kin: Kinetics,
    m1_bc: tuple[float, float],
    tol: float = 1e-10,
    lam: float | None = None,
    max_iters: int | None = None,
) -> Field:
    """Monotone iteration for -u_xx = f(w0^+/alpha) - k*u*(alpha*u - w0).

    Descends from the constant upper solution max(1, m1 boundary values,
    sup of w0^+/alpha) + 1 using the shifted solve
    (-Laplacian + lam) u_new = lam*u + rhs(u); with lam at least the
    Lipschitz bound k*(2*alpha*upper + max|w0|) + 1 the map is monotone, so
    the iterates decrease toward the solution and stay above w0^+/alpha.
    A bracket violation doubles lam and restarts (the shift only controls
    monotonicity, not the limit). Stops when the sup-norm increment is
    below tol.
    """
    if k < 0.0:
        raise ValueError(f"k must be >= 0, got {k}")
    grid = w0.grid
    h = grid.h
    alpha = kin.alpha
    w0_full = w0.full_values()
    lower_full = np.maximum(w0_full, 0.0) / alpha
    lower = lower_full[1:-1]
    upper = max(1.0, m1_bc[0], m1_bc[1], float(lower_full.max())) + 1.0
    source = kin.f(lower)
    lam_base = lam if lam is not None else k * (2.0 * alpha * upper + float(np.max(np.abs(w0_full)))) + 1.0

    for attempt in range(MAX_SHIFT_RETRIES + 1):
        lam_eff = lam_base * 2.0 ** attempt
        iters_cap = max_iters if max_iters is not None else int(4.0 * lam_eff) + 10_000
        ab = np.zeros((2, grid.n_interior))
        ab[0, 1:] = -1.0 / h ** 2
        ab[1, :] = 2.0 / h ** 2 + lam_eff
        chol = scipy.linalg.cholesky_banded(ab)
        u = np.full(grid.n_interior, upper)
        # The fixed source f(lower) >= 0 can push the first iterate above the
        # constant by up to max(source)/lam, so the upper check carries that
        # much slack; the lower check has only solver-noise slack.
        slack_up = 1e-8 + 2.0 * max(0.0, float(source.max())) / lam_eff
        ok = True
        for it in range(iters_cap):
            rhs = lam_eff * u + source - k * u * (alpha * u - w0.values)
            rhs[0] += m1_bc[0] / h ** 2
            rhs[-1] += m1_bc[1] / h ** 2
            u_new = scipy.linalg.cho_solve_banded((chol, False), rhs)
            if np.any(u_new < lower - 1e-8) or np.any(u_new > upper + slack_up):
                logger.warning(
                    "bracket violation at iteration %d with shift %.3e; doubling", it, lam_eff)
                ok = False
                break
            increment = float(np.max(np.abs(u_new - u)))
            u = u_new
            if increment < tol:
                return Field(grid, u, m1_bc[0], m1_bc[1])
        if ok:
            raise NonConvergenceError(
                f"monotone iteration did not reach tol {tol:.1e} in {iters_cap} iterations",
                last=Field(grid, u, m1_bc[0], m1_bc[1]), iterations=iters_cap,
            )
    raise NonConvergenceError(
        f"bracket violations persisted up to shift {lam_eff:.3e}",
        iterations=0,
    )


def pair_system(
    u: Field, v: Field, kin: Kinetics, k: float
) -> tuple[np.ndarray, np.ndarray]:
    """Interleaved residual and bandwidth-2 banded Jacobian of the pair system.

    Unknown ordering is (u_0, v_0, u_1, v_1, ...); the returned ab matrix is
    in scipy solve_banded layout for (l, u) = (2, 2).
    """
    h = u.grid.h
    n = u.grid.n_interior
    uf = u.full_values()
    vf = v.full_values()
    lap_u = (uf[:-2] - 2.0 * uf[1:-1] + uf[2:]) / h ** 2
    lap_v = (vf[:-2] - 2.0 * vf[1:-1] + vf[2:]) / h ** 2
    alpha = kin.alpha
    res_u = lap_u + kin.f(u.values) - k * u.values * v.values
    res_v = lap_v + kin.g(v.values) - alpha * k * u.values * v.values
    resid = np.empty(2 * n)
    resid[0::2] = res_u
    resid[1::2] = res_v

    ab = np.zeros((5, 2 * n))
    ab[0, 2:] = 1.0 / h ** 2
    ab[4, :-2] = 1.0 / h ** 2
    ab[2, 0::2] = -2.0 / h ** 2 + kin.f_prime(u.values) - k * v.values
    ab[2, 1::2] = -2.0 / h ** 2 + kin.g_prime(v.values) - alpha * k * u.values
    ab[1, 1::2] = -k * u.values
    ab[3, 0:2 * n - 1:2] = -alpha * k * v.values
    return resid, ab


def solve_Pk_stationary(
    spec,
    seed: StationaryPair | tuple[Field, Field],
    tol: float = 1e-9,
    max_iters: int = 60,
) -> StationaryPair:
    """Damped Newton on the coupled stationary system from the given seed pair.

    spec is a ProblemSpec: its m1/m2 boundary slots fix the Dirichlet data
    (overriding the seed's slots). Converges when both equation residuals are
    below tol in the grid L2 norm; a result with a component below -tol is
    rejected.
    """
    if isinstance(seed, StationaryPair):
        u_seed, v_seed = seed.u, seed.v
    else:
        u_seed, v_seed = seed
    grid = spec.grid
    kin = spec.kin
    k = spec.k
    u = Field(grid, u_seed.values.copy(), spec.m1.left, spec.m1.right)
    v = Field(grid, v_seed.values.copy(), spec.m2.left, spec.m2.right)

    resid, ab = pair_system(u, v, kin, k)
    rnorm = _pair_norms(resid, grid)
    for it in range(max_iters + 1):
        if max(rnorm) <= tol:
            return _accept_pair(u, v, k, rnorm, it, tol)
        if it == max_iters:
            break
        try:
            delta = scipy.linalg.solve_banded((2, 2), ab, resid)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(
                f"singular pair Jacobian at iteration {it}",
                last=(u, v), residual=max(rnorm), iterations=it,
            ) from exc
        s = 1.0
        total0 = float(np.hypot(*rnorm))
        for _ in range(MAX_HALVINGS):
            u_t = u.with_values(u.values - s * delta[0::2])
            v_t = v.with_values(v.values - s * delta[1::2])
            t_resid, t_ab = pair_system(u_t, v_t, kin, k)
            t_rnorm = _pair_norms(t_resid, grid)
            if float(np.hypot(*t_rnorm)) < total0:
                u, v, resid, ab, rnorm = u_t, v_t, t_resid, t_ab, t_rnorm
                break
            s *= 0.5
        else:
            raise NonConvergenceError(
                f"pair damping stalled at iteration {it} with residuals "
                f"({rnorm[0]:.3e}, {rnorm[1]:.3e})",
                last=(u, v), residual=max(rnorm), iterations=it,
            )
    raise NonConvergenceError(
        f"pair Newton did not converge in {max_iters} iterations "
        f"(residuals {rnorm[0]:.3e}, {rnorm[1]:.3e})",
        last=(u, v), residual=max(rnorm), iterations=max_iters,
    )


def _pair_norms(resid: np.ndarray, grid: Grid) -> tuple[float, float]:
    h = grid.h
    ru = float(np.sqrt(h * np.sum(resid[0::2] ** 2)))
    rv = float(np.sqrt(h * np.sum(resid[1::2] ** 2)))
    return ru, rv


def _accept_pair(
    u: Field, v: Field, k: float, rnorm: tuple[float, float], iters: int, tol: float
) -> StationaryPair:
    low = min(float(u.values.min()), float(v.values.min()))
    if low < -tol:
        raise NonConvergenceError(
            f"converged pair has a negative component ({low:.3e} < -tol)",
            last=(u, v), residual=max(rnorm), iterations=iters,
        )
    return StationaryPair(u=u, v=v, k=k, residuals=rnorm, newton_iters=iters)


def segregated_pair(w0: Field, kin: Kinetics) -> tuple[np.ndarray, np.ndarray]:
    """Interior values of the segregated pair (w0^+/alpha, -w0^-) carried by w0."""
    u_vals = np.maximum(w0.values, 0.0) / kin.alpha
    v_vals = np.maximum(-w0.values, 0.0)
    return u_vals, v_vals


def local_uniqueness_probe(
    spec,
    w0: Field,
    n_seeds: int = 8,
    radius: float = 0.05,
    tol: float = 1e-9,
    seed: int = 0,
    n_modes: int = 6,
) -> UniquenessReport:
    """Count the distinct stationary pairs reached from seeds near (w0^+/alpha, -w0^-).

    Each of the n_seeds starting pairs is the segregated pair plus a random
    low-frequency perturbation of grid L2 size at most radius (per
    component). Limits closer than 10*tol in the summed component L2 distance
    are identified. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    grid = spec.grid
    u_base, v_base = segregated_pair(w0, spec.kin)
    reps: list[StationaryPair] = []
    failures: list[str] = []
    n_converged = 0
    max_residual = 0.0
    for i in range(n_seeds):
        u_vals = u_base + _random_bump(rng, grid, radius, n_modes)
        v_vals = v_base + _random_bump(rng, grid, radius, n_modes)
        u_seed = Field(grid, u_vals, spec.m1.left, spec.m1.right)
        v_seed = Field(grid, v_vals, spec.m2.left, spec.m2.right)
        try:
            pair = solve_Pk_stationary(spec, (u_seed, v_seed), tol=tol)
        except NonConvergenceError as exc:
            failures.append(f"seed {i}: {exc}")
            continue
        n_converged += 1
        max_residual = max(max_residual, max(pair.residuals))
        if not any(_pair_distance(pair, rep) <= 10.0 * tol for rep in reps):
            reps.append(pair)
    return UniquenessReport(
        n_seeds=n_seeds,
        n_converged=n_converged,
        n_distinct=len(reps),
        max_residual=max_residual,
        failures=tuple(failures),
        representatives=tuple(reps),
    )


def _random_bump(rng: np.random.Generator, grid: Grid, radius: float, n_modes: int) -> np.ndarray:
    coeffs = rng.standard_normal(n_modes)
    x = grid.nodes
    bump = np.zeros(grid.n_interior)
    for j, c in enumerate(coeffs, start=1):
        bump += c * np.sin(j * np.pi * x)
    norm = np.sqrt(grid.h * np.sum(bump ** 2))
    if norm == 0.0:
        return bump
    return bump * (radius * rng.uniform() / norm)


def _pair_distance(a: StationaryPair, b: StationaryPair) -> float:
    return l2_norm(a.u - b.u) + l2_norm(a.v - b.v)
