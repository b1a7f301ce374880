"""Grid, field, Laplacian, norm, and mask unit tests with closed-form oracles."""

from __future__ import annotations

import numpy as np
import pytest

from seglab.geometry import (Field, Grid, interior_mask, l2_inner, l2_norm,
                             laplacian_dirichlet, linf_norm)


class TestGrid:
    def test_spacing_and_nodes(self):
        grid = Grid(9)
        assert grid.h == pytest.approx(0.1)
        assert grid.nodes[0] == pytest.approx(0.1)
        assert grid.nodes[-1] == pytest.approx(0.9)
        assert len(grid.nodes) == 9

    def test_nodes_with_boundary_covers_interval(self):
        grid = Grid(5)
        full = grid.nodes_with_boundary
        assert full[0] == 0.0 and full[-1] == 1.0
        assert len(full) == 7

    def test_rejects_bad_sizes(self):
        for bad in (0, -3):
            with pytest.raises(ValueError):
                Grid(bad)


class TestField:
    def test_from_callable_fills_boundary_slots(self):
        grid = Grid(9)
        fld = Field.from_callable(grid, lambda x: 2.0 - 4.0 * x)
        assert fld.left == pytest.approx(2.0)
        assert fld.right == pytest.approx(-2.0)
        assert fld.values[0] == pytest.approx(2.0 - 0.4)

    def test_full_values_assembles_boundary(self):
        grid = Grid(3)
        fld = Field(grid, np.array([1.0, 2.0, 3.0]), 5.0, 7.0)
        assert np.array_equal(fld.full_values(), [5.0, 1.0, 2.0, 3.0, 7.0])

    def test_arithmetic_combines_boundary_slots(self):
        grid = Grid(4)
        a = Field.constant(grid, 2.0)
        b = Field(grid, np.ones(4), 0.5, -0.5)
        diff = a - b
        assert diff.left == pytest.approx(1.5)
        assert diff.right == pytest.approx(2.5)
        scaled = 3.0 * b
        assert scaled.left == pytest.approx(1.5)
        assert np.allclose(scaled.values, 3.0)

    def test_with_values_keeps_boundary(self):
        grid = Grid(4)
        fld = Field(grid, np.zeros(4), 1.0, -1.0)
        new = fld.with_values(np.arange(4.0))
        assert new.left == 1.0 and new.right == -1.0
        assert np.array_equal(new.values, np.arange(4.0))

    def test_grid_mismatch_raises(self):
        a = Field.constant(Grid(4), 1.0)
        b = Field.constant(Grid(5), 1.0)
        with pytest.raises(ValueError):
            _ = a + b

    def test_rejects_wrong_length_values(self):
        with pytest.raises(ValueError):
            Field(Grid(4), np.zeros(3))


class TestLaplacian:
    def test_quadratic_is_exact(self):
        # Second differences of x(1-x) equal the analytic -2 with no
        # truncation error, including at the cells touching the boundary.
        grid = Grid(50)
        fld = Field.from_callable(grid, lambda x: x * (1.0 - x))
        lap = laplacian_dirichlet(fld)
        assert np.max(np.abs(lap.values + 2.0)) < 1e-10, (
            f"quadratic Laplacian off by {np.max(np.abs(lap.values + 2.0)):.2e}")

    def test_sine_eigenvector_identity(self):
        grid = Grid(99)
        fld = Field.from_callable(grid, lambda x: np.sin(np.pi * x))
        lam_h = 4.0 * np.sin(np.pi * grid.h / 2.0) ** 2 / grid.h**2
        lap = laplacian_dirichlet(fld)
        err = linf_norm(lap + lam_h * fld.with_values(fld.values))
        assert err < 1e-9, f"discrete sine eigenvector identity violated by {err:.2e}"

    def test_constant_with_matching_boundary_is_flat(self):
        grid = Grid(20)
        lap = laplacian_dirichlet(Field.constant(grid, 3.5))
        assert np.max(np.abs(lap.values)) == 0.0

    def test_boundary_slots_enter_end_stencils(self):
        grid = Grid(3)
        fld = Field(grid, np.zeros(3), 1.0, 0.0)
        lap = laplacian_dirichlet(fld)
        assert lap.values[0] == pytest.approx(1.0 / grid.h**2)
        assert lap.values[1] == 0.0


class TestNorms:
    def test_l2_of_unit_sine_is_half_root(self):
        # The interior Riemann sum of sin^2(pi x) is exactly 1/2 on a uniform
        # grid, so the norm equals sqrt(1/2) to rounding.
        grid = Grid(999)
        fld = Field.from_callable(grid, lambda x: np.sin(np.pi * x))
        assert l2_norm(fld) == pytest.approx(np.sqrt(0.5), abs=1e-12)

    def test_l2_inner_matches_norm(self):
        grid = Grid(64)
        rng = np.random.default_rng(42)
        fld = Field(grid, rng.standard_normal(64))
        assert l2_inner(fld, fld) == pytest.approx(l2_norm(fld) ** 2, rel=1e-12)

    def test_linf(self):
        grid = Grid(10)
        values = np.zeros(10)
        values[3] = -7.0
        assert linf_norm(Field(grid, values)) == 7.0


class TestInteriorMask:
    def test_threshold_scaling(self):
        # beta/k^(1/4) = 0.12574... at k = 4000 sits strictly between the
        # nodes x_49 = 0.125 and x_50 = 0.1275, so no float tie can flip a
        # node across the cut. Kept band: indices 50..348, 299 nodes.
        grid = Grid(399)
        mask = interior_mask(grid, 4000.0)
        idx = np.flatnonzero(mask)
        assert mask.sum() == 299, f"expected 299 masked nodes, got {mask.sum()}"
        assert idx[0] == 50 and idx[-1] == 348

    def test_mask_grows_with_k(self):
        grid = Grid(200)
        rng = np.random.default_rng(12345)
        ks = np.sort(rng.uniform(1.0, 1e6, size=8))
        prev = interior_mask(grid, ks[0])
        for k in ks[1:]:
            cur = interior_mask(grid, float(k))
            assert np.all(prev <= cur), (
                f"mask at k={k:g} lost nodes relative to smaller k")
            prev = cur

    def test_parameter_validation(self):
        grid = Grid(10)
        with pytest.raises(ValueError):
            interior_mask(grid, 100.0, xi=0.5)
        with pytest.raises(ValueError):
            interior_mask(grid, 100.0, beta=0.0)
        with pytest.raises(ValueError):
            interior_mask(grid, 0.0)
