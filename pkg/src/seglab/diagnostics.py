"""Diagnostics for segregation dynamics.

Everything here is phrased through the combination w = alpha*u - v and its
limit equation w_xx + h(w) = 0:

* energy: E(w) = integral of |w_x|^2 / 2 - H(w), the Lyapunov functional of
  the scalar flow, with H the primitive of h fixed by H(0) = 0;
* residual_S: grid L2 norm of w_xx + h(w), how far w is from the limit
  equation;
* remainder_R: alpha*f(u) - g(v) - h(alpha*u - v), the source felt by w
  beyond the limit nonlinearity; identically zero on segregated pairs;
* projection_error: ||w^+ - alpha*u|| + ||w^- + v|| with w^+ = max(w, 0) and
  w^- = min(w, 0), the L2 distance of the pair from the segregated pair
  carried by its own combination;
* segregation_integral: k * integral of u*v*phi for a fixed weight phi;
* segregation_pointwise: max of min(u, v) over a node mask.

The gradient term of the energy uses one-sided differences over the grid
cells (boundary values included), which is the quadrature for which the
discrete energy decays along the backward-Euler flow; H is integrated by the
trapezoid rule on the full node set.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .geometry import Field, Grid, l2_norm, laplacian_dirichlet
from .kinetics import Kinetics


def default_weight(grid: Grid) -> Field:
    """The first Dirichlet eigenfunction sin(pi*x), the standard weight."""
    return Field.from_callable(grid, lambda x: np.sin(np.pi * x))


def energy(w: Field, kin: Kinetics) -> float:
    """E(w) = sum over cells of (dw/h)^2 * h/2 minus the trapezoid of H(w)."""
    full = w.full_values()
    h = w.grid.h
    grad_term = 0.5 * float(np.sum(np.diff(full) ** 2)) / h
    hw = kin.H(full)
    potential_term = h * (0.5 * hw[0] + float(np.sum(hw[1:-1])) + 0.5 * hw[-1])
    return grad_term - potential_term


def residual_S(w: Field, kin: Kinetics) -> float:
    """Grid L2 norm of w_xx + h(w) over the interior nodes."""
    lap = laplacian_dirichlet(w)
    return l2_norm(lap.with_values(lap.values + kin.h(w.values)))


def remainder_R(u: Field, v: Field, kin: Kinetics) -> Field:
    """alpha*f(u) - g(v) - h(alpha*u - v), evaluated nodewise (boundary too)."""
    alpha = kin.alpha
    uf = u.full_values()
    vf = v.full_values()
    rf = alpha * kin.f(uf) - kin.g(vf) - kin.h(alpha * uf - vf)
    return Field(u.grid, rf[1:-1], float(rf[0]), float(rf[-1]))


def projection_error(u: Field, v: Field, alpha: float) -> float:
    """||w^+ - alpha*u|| + ||w^- + v|| in the grid L2 norm, w = alpha*u - v."""
    w = alpha * u.values - v.values
    w_pos = np.maximum(w, 0.0)
    w_neg = np.minimum(w, 0.0)
    err_u = l2_norm(u.with_values(w_pos - alpha * u.values))
    err_v = l2_norm(v.with_values(w_neg + v.values))
    return err_u + err_v


def segregation_integral(u: Field, v: Field, k: float, phi: Field) -> float:
    """k times the trapezoid quadrature of u*v*phi over [0, 1]."""
    h = u.grid.h
    p = u.full_values() * v.full_values() * phi.full_values()
    return k * h * (0.5 * p[0] + float(np.sum(p[1:-1])) + 0.5 * p[-1])


def segregation_pointwise(u: Field, v: Field, mask: np.ndarray) -> float:
    """Largest value of min(u, v) over the masked interior nodes; 0 if empty."""
    if mask.shape != (u.grid.n_interior,):
        raise ValueError(f"mask shape {mask.shape} does not match grid")
    if not mask.any():
        return 0.0
    return float(np.max(np.minimum(u.values[mask], v.values[mask])))


def dist_to_solution_set(w: Field, solutions: Sequence) -> tuple[int, float]:
    """Index of and grid L2 distance to the nearest profile in solutions.

    Entries may be Fields or any object with a Field-valued .w attribute.
    """
    if not solutions:
        raise ValueError("solution set is empty")
    dists = [l2_norm(w - _as_field(s)) for s in solutions]
    idx = int(np.argmin(dists))
    return idx, dists[idx]


def _as_field(solution) -> Field:
    return solution.w if hasattr(solution, "w") else solution


@dataclass(frozen=True)
class DiagnosticSnapshot:
    """One row of the run history; field order matches the CSV column order."""

    t: float
    energy: float
    residual_S: float
    remainder_R_l2: float
    seg_integral: float
    seg_pointwise: float
    proj_error: float
    dist_to_limit: float | None

    @classmethod
    def column_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


def snapshot(
    t: float,
    u: Field,
    v: Field,
    kin: Kinetics,
    k: float,
    weight: Field,
    mask: np.ndarray,
    targets: Sequence = (),
) -> DiagnosticSnapshot:
    """Evaluate the full diagnostic row for one state of the evolution."""
    w = (kin.alpha * u) - v
    if targets:
        _, dist = dist_to_solution_set(w, targets)
    else:
        dist = None
    return DiagnosticSnapshot(
        t=t,
        energy=energy(w, kin),
        residual_S=residual_S(w, kin),
        remainder_R_l2=l2_norm(remainder_R(u, v, kin)),
        seg_integral=segregation_integral(u, v, k, weight),
        seg_pointwise=segregation_pointwise(u, v, mask),
        proj_error=projection_error(u, v, kin.alpha),
        dist_to_limit=dist,
    )
