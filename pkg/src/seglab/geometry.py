"""Uniform 1D grids on (0, 1) and scalar fields with Dirichlet boundary slots.

The whole lab works on the unit interval with n_interior equally spaced interior
nodes, spacing h = 1/(n_interior + 1). A Field stores interior values together
with the two boundary values; the boundary values enter the discrete Laplacian
stencil at the first and last interior node but are excluded from norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid of interior nodes on (0, 1).

    Node i (0-based) sits at x = (i + 1) * h with h = 1/(n_interior + 1); the
    boundary points x = 0 and x = 1 are not nodes and are represented by the
    boundary slots of a Field.
    """

    n_interior: int

    def __post_init__(self) -> None:
        if self.n_interior < 1:
            raise ValueError(f"n_interior must be >= 1, got {self.n_interior}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates, shape (n_interior,)."""
        return self.h * np.arange(1, self.n_interior + 1)

    @property
    def nodes_with_boundary(self) -> np.ndarray:
        """All coordinates including 0 and 1, shape (n_interior + 2,)."""
        return np.linspace(0.0, 1.0, self.n_interior + 2)


@dataclass
class Field:
    """Scalar field: interior values plus the two Dirichlet boundary values."""

    grid: Grid
    values: np.ndarray
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_interior,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid with "
                f"{self.grid.n_interior} interior nodes"
            )
        self.left = float(self.left)
        self.right = float(self.right)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Sample fn at the interior nodes and at x = 0, 1 for the boundary slots."""
        endpoints = fn(np.array([0.0, 1.0]))
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float),
                   float(endpoints[0]), float(endpoints[1]))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n_interior, float(value)), value, value)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.left, self.right)

    def with_values(self, values: np.ndarray) -> "Field":
        """Same grid and boundary slots, new interior values."""
        return Field(self.grid, np.asarray(values, dtype=float), self.left, self.right)

    def full_values(self) -> np.ndarray:
        """Interior values with the boundary values prepended/appended."""
        return np.concatenate(([self.left], self.values, [self.right]))

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values,
                     self.left + other.left, self.right + other.right)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values,
                     self.left - other.left, self.right - other.right)

    def __rmul__(self, scalar: float) -> "Field":
        return Field(self.grid, scalar * self.values,
                     scalar * self.left, scalar * self.right)


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid.n_interior != b.grid.n_interior:
        raise ValueError(
            f"grid mismatch: {a.grid.n_interior} vs {b.grid.n_interior} interior nodes"
        )


def laplacian_dirichlet(f: Field) -> Field:
    """Second-order central Laplacian using the Dirichlet slots at the ends.

    Returns a Field on the same grid whose boundary slots are zero (the
    Laplacian of the boundary data is not defined by the stencil).
    """
    h2 = f.grid.h ** 2
    full = f.full_values()
    lap = (full[:-2] - 2.0 * full[1:-1] + full[2:]) / h2
    return Field(f.grid, lap, 0.0, 0.0)


def l2_norm(f: Field) -> float:
    """Grid-weighted L2 norm over interior values: sqrt(h * sum v_i^2)."""
    return float(np.sqrt(f.grid.h * np.dot(f.values, f.values)))


def linf_norm(f: Field) -> float:
    """Max absolute interior value."""
    return float(np.max(np.abs(f.values))) if f.grid.n_interior else 0.0


def l2_inner(a: Field, b: Field) -> float:
    """Grid-weighted L2 inner product over interior values: h * sum a_i b_i."""
    _check_same_grid(a, b)
    return float(a.grid.h * np.dot(a.values, b.values))


def interior_mask(grid: Grid, k: float, beta: float = 1.0, xi: float = 0.25) -> np.ndarray:
    """Boolean mask of interior nodes at distance >= beta / k^(1/2 - xi) from the boundary.

    This is the region where segregation estimates are asserted; it shrinks
    toward the full interval as k grows. xi must lie in (0, 1/2) so the
    threshold actually decays with k.
    """
    if not 0.0 < xi < 0.5:
        raise ValueError(f"xi must lie in (0, 1/2), got {xi}")
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if k <= 0.0:
        raise ValueError(f"k must be positive, got {k}")
    threshold = beta / k ** (0.5 - xi)
    x = grid.nodes
    return np.minimum(x, 1.0 - x) >= threshold
