"""Linearization spectra against closed-form Dirichlet eigenvalues."""

from __future__ import annotations

import numpy as np
import pytest

from seglab.geometry import Field, Grid
from seglab.kinetics import Kinetics
from seglab.spectra import (GenericityReport, LinearizedOperator,
                            assemble_linearization, default_lambda_tol,
                            eigen_residual, genericity_sweep, is_nondegenerate,
                            smallest_magnitude_eigenvalue)


def _laplacian_eigenvalue(grid: Grid, j: int = 1) -> float:
    """j-th eigenvalue of the zero-Dirichlet second-difference matrix."""
    return -4.0 * np.sin(j * np.pi * grid.h / 2.0) ** 2 / grid.h**2


class TestOperator:
    @pytest.mark.parametrize("n", [400, 999])
    def test_zero_potential_ground_eigenvalue(self, n):
        grid = Grid(n)
        op = LinearizedOperator(grid=grid, potential=np.zeros(n))
        lam, phi = smallest_magnitude_eigenvalue(op)
        assert lam == pytest.approx(_laplacian_eigenvalue(grid), rel=1e-6)
        assert eigen_residual(op, lam, phi) <= 1e-8

    def test_ground_eigenvector_is_the_sine(self):
        grid = Grid(200)
        op = LinearizedOperator(grid=grid, potential=np.zeros(200))
        _, phi = smallest_magnitude_eigenvalue(op)
        # Grid-normalized first eigenfunction: sum of sin^2 over the nodes is
        # (n+1)/2, so the unit-norm profile is sqrt(2)*sin(pi x).
        expected = np.sqrt(2.0) * np.sin(np.pi * grid.nodes)
        assert np.max(np.abs(phi.values - expected)) < 1e-6
        assert phi.left == 0.0 and phi.right == 0.0

    def test_constant_potential_shifts_the_spectrum(self):
        grid = Grid(300)
        c = 5.0
        op = LinearizedOperator(grid=grid, potential=np.full(300, c))
        lam, _ = smallest_magnitude_eigenvalue(op)
        assert lam == pytest.approx(c + _laplacian_eigenvalue(grid), rel=1e-6)

    def test_apply_matches_banded_matrix(self):
        grid = Grid(37)
        rng = np.random.default_rng(42)
        op = LinearizedOperator(grid=grid, potential=rng.standard_normal(37))
        ab = op.banded()
        d = rng.standard_normal(37)
        product = ab[1] * d
        product[:-1] += ab[0, 1:] * d[1:]
        product[1:] += ab[2, :-1] * d[:-1]
        assert np.allclose(op.apply(d), product, atol=1e-12)

    def test_potential_shape_checked(self):
        with pytest.raises(ValueError):
            LinearizedOperator(grid=Grid(10), potential=np.zeros(9))


class TestAssemble:
    def test_logistic_potential_closed_form(self, default_scenario, limit_solution):
        # For matching logistic reactions the a.e. derivative of h is
        # 1 - 2|w| on both sides of the kink.
        op = assemble_linearization(limit_solution, default_scenario.kin)
        w = limit_solution.w.values
        assert np.allclose(op.potential, 1.0 - 2.0 * np.abs(w), atol=1e-14)
        assert op.kink_nodes == 0

    def test_accepts_bare_field(self, default_scenario, limit_solution):
        direct = assemble_linearization(limit_solution.w, default_scenario.kin)
        wrapped = assemble_linearization(limit_solution, default_scenario.kin)
        assert np.array_equal(direct.potential, wrapped.potential)

    def test_exact_zero_nodes_are_counted(self):
        grid = Grid(11)
        values = np.linspace(1.0, -1.0, 11)
        assert values[5] == 0.0
        op = assemble_linearization(Field(grid, values, 1.0, -1.0),
                                    Kinetics.logistic())
        assert op.kink_nodes == 1


class TestDegeneracy:
    def test_constructed_kernel_is_detected(self):
        # Potential equal to the first Laplacian eigenvalue (sign flipped)
        # makes sin(pi x) an exact null vector of the operator.
        grid = Grid(150)
        c = -_laplacian_eigenvalue(grid)
        op = LinearizedOperator(grid=grid, potential=np.full(150, c))
        lam, phi = smallest_magnitude_eigenvalue(op)
        assert abs(lam) < 1e-8
        assert eigen_residual(op, lam, phi) < 1e-7

    def test_certified_solution_is_nondegenerate(self, default_scenario, limit_solution):
        assert is_nondegenerate(limit_solution, default_scenario.kin)

    def test_threshold_override(self, default_scenario, limit_solution):
        assert not is_nondegenerate(limit_solution, default_scenario.kin,
                                    tol_lambda=1.0e6)

    def test_default_tolerance_tracks_potential_size(self):
        grid = Grid(50)
        small = LinearizedOperator(grid=grid, potential=np.zeros(50))
        big = LinearizedOperator(grid=grid, potential=np.full(50, 100.0))
        assert default_lambda_tol(big) > default_lambda_tol(small)


@pytest.fixture(scope="module")
def base_report():
    return genericity_sweep(Grid(100), (2.0, -2.0), n_perturb=3,
                            magnitude=0.0, kin=Kinetics.logistic(), seed=0)


class TestGenericitySweep:
    def test_zero_magnitude_reproduces_base_problem(self, base_report):
        assert base_report.n_evaluated == 3
        assert base_report.total_solutions == 3
        assert base_report.fraction_nondegenerate == 1.0
        assert base_report.failures == ()

    def test_min_lambda_matches_direct_evaluation(self, base_report):
        from seglab.stationary import shoot_enumerate

        grid = Grid(100)
        sol = shoot_enumerate(grid, Kinetics.logistic(), 2.0, -2.0, n_scan=400)[0]
        op = assemble_linearization(sol, Kinetics.logistic())
        lam, _ = smallest_magnitude_eigenvalue(op)
        assert base_report.min_abs_lambda == pytest.approx(abs(lam), rel=1e-9)

    def test_seed_determinism(self):
        kwargs = dict(n_perturb=4, magnitude=0.1, kin=Kinetics.logistic(),
                      seed=12345, n_scan=200)
        r1 = genericity_sweep(Grid(60), (2.0, -2.0), **kwargs)
        r2 = genericity_sweep(Grid(60), (2.0, -2.0), **kwargs)
        assert r1 == r2

    def test_trial_count_validated(self):
        with pytest.raises(ValueError):
            genericity_sweep(Grid(10), (2.0, -2.0), n_perturb=0,
                             magnitude=0.1, kin=Kinetics.logistic())

    def test_empty_report_fraction_is_nan(self):
        report = GenericityReport(n_perturb=1, n_evaluated=0,
                                  n_all_nondegenerate=0, total_solutions=0,
                                  min_abs_lambda=float("inf"), failures=("x",))
        assert np.isnan(report.fraction_nondegenerate)
