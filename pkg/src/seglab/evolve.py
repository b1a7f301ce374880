"""Time integration of the two-species competition system.

The parabolic problem on (0, 1) is

    u_t = u_xx + f(u) - k*u*v,        u = m1 on the boundary,
    v_t = v_xx + g(v) - alpha*k*u*v,  v = m2 on the boundary,

started from u = m1, v = m2. Both species stay inside [0, M] with
M = max(1, sup m1, sup m2), and the IMEX scheme used here (implicit
diffusion, explicit reactions and coupling) preserves that box under the
step-size cap exposed as ProblemSpec.dt_max.

The coupling is assembled once per node as C = dt*k*u*v and subtracted from
the u-side as C and from the v-side as alpha*C, so the combination
w = alpha*u - v evolves exactly like a backward-Euler step of
w_t = w_xx + alpha*f(u) - g(v): the stiff k-terms drop out of the assembled
right-hand sides in floating point, not just analytically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _stepper
from .diagnostics import DiagnosticSnapshot, default_weight, snapshot
from .geometry import Field, Grid, interior_mask, l2_norm
from .kinetics import Kinetics

logger = logging.getLogger(__name__)

# Fraction of the explicit-reaction stability limit allowed by dt_max.
REACTION_SAFETY = 0.5
# dt cap in units of h^2; keeps the splitting error of the explicit coupling
# well below the diffusion truncation error.
DIFFUSION_DT_FACTOR = 0.4
# Values this far outside [0, M] are treated as a blown-up run.
BLOWUP_FACTOR = 100.0

_LIPSCHITZ_SAMPLES = 257


class BlowupError(RuntimeError):
    """The discrete solution left every reasonable bound or became non-finite."""

    def __init__(self, message: str, t: float, step: int) -> None:
        super().__init__(message)
        self.t = t
        self.step = step


@dataclass(frozen=True)
class ProblemSpec:
    """Grid, kinetics, interaction strength, data profiles and region exponents.

    m1 and m2 double as initial data and (through their endpoint slots) as the
    time-independent Dirichlet boundary values. They must be nonnegative, and
    for k > 0 the combination alpha*m1 - m2 must not vanish at both endpoints;
    otherwise the segregation limit has trivial boundary data and the run is
    rejected. beta and xi fix the interior region {dist to boundary >=
    beta / k^(1/2 - xi)} used by the pointwise segregation diagnostic.
    """

    grid: Grid
    kin: Kinetics
    k: float
    m1: Field
    m2: Field
    beta: float = 1.0
    xi: float = 0.25

    def __post_init__(self) -> None:
        if not np.isfinite(self.k) or self.k < 0.0:
            raise ValueError(f"interaction strength k must be finite and >= 0, got {self.k}")
        if not (self.beta > 0.0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.xi < 0.5:
            raise ValueError(f"xi must lie in (0, 1/2), got {self.xi}")
        for name, profile in (("m1", self.m1), ("m2", self.m2)):
            if profile.grid.n_interior != self.grid.n_interior:
                raise ValueError(f"{name} lives on a different grid than the problem")
            full = profile.full_values()
            if not np.all(np.isfinite(full)):
                raise ValueError(f"{name} contains non-finite values")
            if full.min() < 0.0:
                raise ValueError(f"{name} must be nonnegative, min is {full.min():.3e}")
        if self.k > 0.0:
            bc_l, bc_r = self.bc_w
            if abs(bc_l) + abs(bc_r) == 0.0:
                raise ValueError(
                    "alpha*m1 - m2 vanishes at both endpoints; the combination "
                    "w needs nontrivial boundary data when k > 0"
                )

    @property
    def bc_w(self) -> tuple[float, float]:
        """Boundary values of the combination w = alpha*u - v."""
        a = self.kin.alpha
        return (a * self.m1.left - self.m2.left, a * self.m1.right - self.m2.right)

    @property
    def box_bound(self) -> float:
        """Invariant upper bound M = max(1, sup m1, sup m2)."""
        return max(1.0, self.m1.full_values().max(), self.m2.full_values().max())

    @property
    def dt_max(self) -> float:
        """Largest step size for which the scheme keeps both species in [0, M].

        Three caps: a diffusion-scaled cap 0.4*h^2 (accuracy of the
        splitting), an explicit-reaction cap from the sampled Lipschitz
        constants of f and g on [0, M], and 1/(2*(1 + max(alpha,1)*k*M)) so
        the explicit sink -k*u*v cannot push a species below zero.
        """
        m = self.box_bound
        s = np.linspace(0.0, m, _LIPSCHITZ_SAMPLES)
        lip = max(
            1.0,
            float(np.max(np.abs(self.kin.f_prime(s)))),
            float(np.max(np.abs(self.kin.g_prime(s)))),
        )
        cap_react = REACTION_SAFETY / lip
        cap_couple = 1.0 / (2.0 * (1.0 + max(self.kin.alpha, 1.0) * self.k * m))
        return min(DIFFUSION_DT_FACTOR * self.grid.h ** 2, cap_react, cap_couple)

    def region_mask(self) -> np.ndarray:
        """Boolean mask of the interior region; empty when k = 0."""
        if self.k <= 0.0:
            return np.zeros(self.grid.n_interior, dtype=bool)
        return interior_mask(self.grid, self.k, self.beta, self.xi)


@dataclass
class SystemState:
    """Solution pair at one instant of the time integration."""

    t: float
    step: int
    u: Field
    v: Field

    def combination(self, alpha: float) -> Field:
        """The segregation variable w = alpha*u - v."""
        return (alpha * self.u) - self.v


@dataclass(frozen=True)
class EvolveConfig:
    """Controls for evolve_to(): step size, horizon, chunking and steady stop.

    dt=None means use ProblemSpec.dt_max. Snapshots are taken every
    snapshot_every steps (the last stretch may be shorter); the run stops
    early once (||du/dt|| + ||dv/dt||) in the grid L2 norm falls below
    steady_tol.
    """

    t_end: float = 50.0
    dt: float | None = None
    snapshot_every: int = 2000
    steady_tol: float = 1e-6
    use_jit: bool = True

    def __post_init__(self) -> None:
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if self.steady_tol < 0.0:
            raise ValueError(f"steady_tol must be >= 0, got {self.steady_tol}")


@dataclass
class EvolveResult:
    """Final state plus the per-snapshot diagnostic trajectory of a run."""

    state: SystemState
    trajectory: list[DiagnosticSnapshot]
    steady: bool
    t_steady: float | None
    dt: float
    n_steps: int
    min_u: float
    max_u: float
    min_v: float
    max_v: float
    max_coupling_defect: float
    final_rate: float

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.min_u, self.max_u, self.min_v, self.max_v)


def initial_state(spec: ProblemSpec) -> SystemState:
    """The state at t = 0: u = m1, v = m2."""
    return SystemState(t=0.0, step=0, u=spec.m1.copy(), v=spec.m2.copy())


def detect_steady(prev: SystemState, nxt: SystemState, dt: float, tol: float) -> bool:
    """True iff the L2 difference quotient of the pair drops below tol."""
    rate = (l2_norm(nxt.u - prev.u) + l2_norm(nxt.v - prev.v)) / dt
    return rate < tol


def step_system(state: SystemState, spec: ProblemSpec, dt: float) -> SystemState:
    """Advance one IMEX step; reference path, used by tests and small studies."""
    kin = spec.kin
    if kin.f_coeffs is not None and kin.g_coeffs is not None:
        out = _stepper.chunk_run_reference(
            state.u.values, state.v.values,
            _descending(kin.f_coeffs), _descending(kin.g_coeffs),
            kin.alpha, spec.k, dt, spec.grid.h,
            spec.m1.left, spec.m1.right, spec.m2.left, spec.m2.right, 1,
        )
        u_new, v_new = out[0], out[1]
    else:
        u_new, v_new = _step_callable_kinetics(spec, state.u.values, state.v.values, dt)
    return SystemState(
        t=state.t + dt,
        step=state.step + 1,
        u=state.u.with_values(u_new),
        v=state.v.with_values(v_new),
    )


def step_scalar_w(w: Field, kin: Kinetics, bc: tuple[float, float], dt: float) -> Field:
    """One IMEX step of w_t = w_xx + h(w) with Dirichlet data bc."""
    r = dt / w.grid.h ** 2
    rhs = w.values + dt * kin.h(w.values)
    values = _stepper.solve_heat_reference(rhs, r, bc[0], bc[1])
    return Field(w.grid, values, bc[0], bc[1])


def evolve_to(
    state: SystemState,
    spec: ProblemSpec,
    cfg: EvolveConfig | None = None,
    targets: Sequence[Field] = (),
) -> EvolveResult:
    """Integrate from the given state to cfg.t_end or to a numerical steady state.

    One DiagnosticSnapshot is recorded per chunk of cfg.snapshot_every steps
    (none for t_end <= state.t). targets, when given, are candidate limit
    profiles for the dist_to_limit column. Raises BlowupError if the solution
    becomes non-finite or leaves [0, M] by a factor of BLOWUP_FACTOR.
    """
    cfg = cfg or EvolveConfig()
    dt = _resolve_dt(spec, cfg)
    kin = spec.kin
    box = spec.box_bound
    n_total = max(0, int(np.ceil((cfg.t_end - state.t) / dt - 1e-9)))

    weight = default_weight(spec.grid)
    mask = spec.region_mask()
    trajectory: list[DiagnosticSnapshot] = []

    chunk = _chunk_fn(kin, cfg.use_jit)
    fc = _descending(kin.f_coeffs) if chunk is not None else None
    gc = _descending(kin.g_coeffs) if chunk is not None else None

    u = state.u.values.copy()
    v = state.v.values.copy()
    min_u = float(u.min())
    max_u = float(u.max())
    min_v = float(v.min())
    max_v = float(v.max())
    max_defect = 0.0
    steady = False
    t_steady: float | None = None
    rate = np.inf
    done = 0

    while done < n_total:
        n_chunk = min(cfg.snapshot_every, n_total - done)
        if chunk is not None:
            (u, v, _, _, c_min_u, c_max_u, c_min_v, c_max_v,
             c_defect, du_l2, dv_l2, finite) = chunk(
                u, v, fc, gc, kin.alpha, spec.k, dt, spec.grid.h,
                spec.m1.left, spec.m1.right, spec.m2.left, spec.m2.right,
                n_chunk,
            )
        else:
            (u, v, c_min_u, c_max_u, c_min_v, c_max_v,
             c_defect, du_l2, dv_l2, finite) = _run_chunk_callable(
                spec, u, v, dt, n_chunk)
        done += n_chunk
        t = state.t + done * dt
        min_u = min(min_u, c_min_u)
        max_u = max(max_u, c_max_u)
        min_v = min(min_v, c_min_v)
        max_v = max(max_v, c_max_v)
        max_defect = max(max_defect, c_defect)

        if not finite or max(abs(c_min_u), abs(c_max_u), abs(c_min_v), abs(c_max_v)) > BLOWUP_FACTOR * box:
            raise BlowupError(
                f"solution blew up by t={t:.6g} (u in [{c_min_u:.3g}, {c_max_u:.3g}], "
                f"v in [{c_min_v:.3g}, {c_max_v:.3g}])",
                t=t, step=state.step + done,
            )

        u_field = state.u.with_values(u.copy())
        v_field = state.v.with_values(v.copy())
        trajectory.append(
            snapshot(t, u_field, v_field, kin, spec.k, weight, mask, targets))

        rate = (du_l2 + dv_l2) / dt
        if rate < cfg.steady_tol:
            steady = True
            t_steady = t
            logger.info("steady at t=%.6g after %d steps (rate %.3e)", t, done, rate)
            break

    final = SystemState(
        t=state.t + done * dt,
        step=state.step + done,
        u=state.u.with_values(u if done else u.copy()),
        v=state.v.with_values(v if done else v.copy()),
    )
    return EvolveResult(
        state=final,
        trajectory=trajectory,
        steady=steady,
        t_steady=t_steady,
        dt=dt,
        n_steps=done,
        min_u=min_u,
        max_u=max_u,
        min_v=min_v,
        max_v=max_v,
        max_coupling_defect=max_defect,
        final_rate=float(rate),
    )


def _resolve_dt(spec: ProblemSpec, cfg: EvolveConfig) -> float:
    dt_cap = spec.dt_max
    if cfg.dt is None:
        return dt_cap
    if cfg.dt > dt_cap * (1.0 + 1e-12):
        raise ValueError(
            f"dt={cfg.dt:.3e} exceeds the stability cap dt_max={dt_cap:.3e} "
            f"for k={spec.k:.3g} on this grid"
        )
    return cfg.dt


def _chunk_fn(kin: Kinetics, use_jit: bool) -> Callable | None:
    """Pick the compiled or reference chunk runner; None for callable kinetics."""
    if kin.f_coeffs is None or kin.g_coeffs is None:
        return None
    return _stepper.chunk_run if use_jit else _stepper.chunk_run_reference


def _descending(coeffs: np.ndarray | None) -> np.ndarray | None:
    if coeffs is None:
        return None
    return np.ascontiguousarray(coeffs[::-1], dtype=float)


def _step_callable_kinetics(
    spec: ProblemSpec, u: np.ndarray, v: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """One IMEX step for kinetics given only as callables (no jit path)."""
    kin = spec.kin
    r = dt / spec.grid.h ** 2
    coupling = dt * (spec.k * (u * v))
    rhs_u = u + dt * kin.f(u) - coupling
    rhs_v = v + dt * kin.g(v) - kin.alpha * coupling
    u_new = _stepper.solve_heat_reference(rhs_u, r, spec.m1.left, spec.m1.right)
    v_new = _stepper.solve_heat_reference(rhs_v, r, spec.m2.left, spec.m2.right)
    return u_new, v_new


def _run_chunk_callable(
    spec: ProblemSpec, u: np.ndarray, v: np.ndarray, dt: float, n_steps: int
) -> tuple:
    """Chunk loop for callable kinetics; mirrors the compiled runner's reporting."""
    min_u = np.inf
    max_u = -np.inf
    min_v = np.inf
    max_v = -np.inf
    u_prev = u
    v_prev = v
    for _ in range(n_steps):
        u_prev, v_prev = u, v
        u, v = _step_callable_kinetics(spec, u, v, dt)
        min_u = min(min_u, float(u.min()))
        max_u = max(max_u, float(u.max()))
        min_v = min(min_v, float(v.min()))
        max_v = max(max_v, float(v.max()))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            return u, v, min_u, max_u, min_v, max_v, 0.0, np.inf, np.inf, False
    h = spec.grid.h
    du_l2 = float(np.sqrt(h * np.sum((u - u_prev) ** 2)))
    dv_l2 = float(np.sqrt(h * np.sum((v - v_prev) ** 2)))
    return u, v, min_u, max_u, min_v, max_v, 0.0, du_l2, dv_l2, True
