"""Time-stepping tests: spectral decay oracle, bound preservation, cancellation."""

from __future__ import annotations

import numpy as np
import pytest

from seglab.evolve import (BlowupError, EvolveConfig, ProblemSpec, SystemState,
                           detect_steady, evolve_to, initial_state,
                           step_scalar_w, step_system)
from seglab.geometry import Field, Grid, l2_norm, linf_norm
from seglab.kinetics import Kinetics


def _zero_kinetics() -> Kinetics:
    return Kinetics.from_polynomials([0.0], [0.0])


def _spec(grid: Grid, kin: Kinetics, k: float, m1, m2) -> ProblemSpec:
    return ProblemSpec(grid=grid, kin=kin, k=k, m1=m1, m2=m2)


class TestProblemSpec:
    def test_box_bound(self):
        grid = Grid(20)
        spec = _spec(grid, Kinetics.logistic(), 10.0,
                     Field.from_callable(grid, lambda x: 2.0 * (1.0 - x)),
                     Field.from_callable(grid, lambda x: 2.0 * x))
        assert spec.box_bound == pytest.approx(2.0)

    def test_bc_w_combination(self):
        grid = Grid(10)
        kin = Kinetics.logistic(alpha=2.0)
        spec = ProblemSpec(grid=grid, kin=kin, k=5.0,
                           m1=Field.constant(grid, 1.0),
                           m2=Field(grid, np.zeros(10), 0.5, 0.0))
        assert spec.bc_w == (pytest.approx(1.5), pytest.approx(2.0))

    def test_rejects_coupling_without_boundary_contrast(self):
        # With zero data the combination alpha*m1 - m2 vanishes identically on
        # the boundary, which removes the limit problem's data; only the
        # uncoupled k = 0 case is allowed to do that.
        grid = Grid(10)
        kin = Kinetics.logistic()
        zero = Field.constant(grid, 0.0)
        with pytest.raises(ValueError):
            ProblemSpec(grid=grid, kin=kin, k=100.0, m1=zero, m2=zero)
        ProblemSpec(grid=grid, kin=kin, k=0.0, m1=zero, m2=zero)

    def test_rejects_negative_boundary_data(self):
        grid = Grid(10)
        bad = Field.constant(grid, -0.1)
        with pytest.raises(ValueError):
            _spec(grid, Kinetics.logistic(), 1.0, bad, Field.constant(grid, 1.0))

    def test_dt_max_shrinks_with_k(self):
        grid = Grid(3)
        kin = Kinetics.logistic()
        m1 = Field.constant(grid, 1.0)
        m2 = Field(grid, np.zeros(3), 0.0, 0.5)
        dts = [_spec(grid, kin, k, m1, m2).dt_max for k in (0.0, 1e2, 1e4)]
        assert dts[0] > dts[1] > dts[2]

    def test_region_mask_empty_without_coupling(self):
        grid = Grid(10)
        spec = _spec(grid, Kinetics.logistic(), 0.0,
                     Field.constant(grid, 1.0), Field.constant(grid, 0.0))
        assert not spec.region_mask().any()


class TestHeatDecayOracle:
    def test_discrete_modal_decay_rate(self):
        # With zero reactions and k = 0 the scheme is pure backward-Euler heat
        # flow; the discrete sine mode contracts by exactly 1/(1 + dt*lam_h)
        # per step, with lam_h the discrete Dirichlet eigenvalue.
        grid = Grid(63)
        kin = _zero_kinetics()
        m1 = Field.from_callable(grid, lambda x: np.sin(np.pi * x))
        m2 = Field.constant(grid, 0.0)
        spec = _spec(grid, kin, 0.0, m1, m2)
        dt = spec.dt_max
        n_steps = 50
        state = initial_state(spec)
        for _ in range(n_steps):
            state = step_system(state, spec, dt)
        lam_h = 4.0 * np.sin(np.pi * grid.h / 2.0) ** 2 / grid.h**2
        factor = (1.0 + dt * lam_h) ** (-n_steps)
        expected = factor * m1.values
        err = np.max(np.abs(state.u.values - expected)) / factor
        assert err < 1e-10, f"modal decay off by relative {err:.2e}"

    def test_scalar_step_matches_system_on_segregated_data(self):
        # When (u, v) carries exactly the segregated pair of w the coupling
        # product vanishes node-wise and the reactions reproduce h(w), so one
        # system step must equal one scalar w step to rounding even at
        # enormous k.
        grid = Grid(80)
        kin = Kinetics.logistic()
        w0 = Field.from_callable(grid, lambda x: 2.0 - 4.0 * x)
        m1 = Field(grid, np.maximum(w0.values, 0.0), max(w0.left, 0.0), max(w0.right, 0.0))
        m2 = Field(grid, np.maximum(-w0.values, 0.0), max(-w0.left, 0.0), max(-w0.right, 0.0))
        for k in (1e2, 1e6, 1e10):
            spec = _spec(grid, kin, k, m1, m2)
            dt = 1e-11
            stepped = step_system(initial_state(spec), spec, dt)
            w_sys = stepped.combination(kin.alpha)
            w_scalar = step_scalar_w(w0, kin, spec.bc_w, dt)
            err = linf_norm(w_sys - w_scalar)
            assert err < 1e-12, f"w-consistency broke at k={k:g}: {err:.2e}"

    def test_scalar_step_deviation_bounded_by_remainder(self):
        # With overlapping species the combination drifts from the scalar flow
        # by exactly dt times the remainder coupling term.
        from seglab.diagnostics import remainder_R

        grid = Grid(60)
        kin = Kinetics.logistic()
        m1 = Field.from_callable(grid, lambda x: 1.0 + 0.5 * np.sin(np.pi * x))
        m2 = Field.from_callable(grid, lambda x: 0.5 + 0.4 * x)
        spec = _spec(grid, kin, 50.0, m1, m2)
        dt = 1e-6
        stepped = step_system(initial_state(spec), spec, dt)
        w0 = initial_state(spec).combination(kin.alpha)
        w_sys = stepped.combination(kin.alpha)
        w_scalar = step_scalar_w(w0, kin, spec.bc_w, dt)
        drift = linf_norm(w_sys - w_scalar)
        bound = dt * linf_norm(remainder_R(m1, m2, kin))
        assert drift <= bound * (1.0 + 1e-6) + 1e-15, (
            f"drift {drift:.3e} exceeds dt*|R| = {bound:.3e}")


class TestBoundsAndBlowup:
    def test_invariant_box_under_strong_coupling(self):
        grid = Grid(100)
        kin = Kinetics.logistic()
        m1 = Field.from_callable(grid, lambda x: 2.0 * (1.0 - x))
        m2 = Field.from_callable(grid, lambda x: 2.0 * x)
        spec = _spec(grid, kin, 1e3, m1, m2)
        res = evolve_to(initial_state(spec), spec,
                        EvolveConfig(t_end=0.2, snapshot_every=500))
        lo = min(res.min_u, res.min_v)
        hi = max(res.max_u, res.max_v)
        assert lo >= -1e-12, f"species dipped to {lo:.3e}"
        assert hi <= spec.box_bound + 1e-12, f"species rose to {hi}"
        assert res.max_coupling_defect == 0.0

    def test_unstable_reaction_raises_blowup(self):
        # From the uniform state 8, f(s) = s^2 outruns the diffusive leak
        # toward the boundary data (no equilibrium above the data level).
        grid = Grid(10)
        kin = Kinetics.from_polynomials([0.0, 0.0, 1.0], [0.0])
        m1 = Field.constant(grid, 8.0)
        m2 = Field.constant(grid, 0.0)
        spec = ProblemSpec(grid=grid, kin=kin, k=0.0, m1=m1, m2=m2)
        with pytest.raises(BlowupError) as info:
            evolve_to(initial_state(spec), spec, EvolveConfig(t_end=10.0))
        assert info.value.t > 0.0
        assert info.value.step > 0


class TestEvolveTo:
    @pytest.fixture
    def small_spec(self):
        grid = Grid(40)
        kin = Kinetics.logistic()
        m1 = Field.from_callable(grid, lambda x: 2.0 * (1.0 - x))
        m2 = Field.from_callable(grid, lambda x: 2.0 * x)
        return _spec(grid, kin, 100.0, m1, m2)

    def test_zero_horizon_returns_input_state(self, small_spec):
        state = initial_state(small_spec)
        res = evolve_to(state, small_spec, EvolveConfig(t_end=0.0))
        assert res.trajectory == []
        assert res.n_steps == 0
        assert res.state.t == 0.0
        assert np.array_equal(res.state.u.values, state.u.values)

    def test_snapshot_count_excludes_initial_state(self, small_spec):
        dt = small_spec.dt_max
        res = evolve_to(initial_state(small_spec), small_spec,
                        EvolveConfig(t_end=5.0 * dt, dt=dt, snapshot_every=1,
                                     steady_tol=0.0))
        assert len(res.trajectory) == 5
        assert res.trajectory[0].t == pytest.approx(dt)
        assert res.trajectory[-1].t == pytest.approx(5.0 * dt)

    def test_partial_final_step_rounds_up(self, small_spec):
        dt = small_spec.dt_max
        res = evolve_to(initial_state(small_spec), small_spec,
                        EvolveConfig(t_end=4.5 * dt, dt=dt, snapshot_every=100,
                                     steady_tol=0.0))
        assert res.n_steps == 5

    def test_oversized_dt_rejected(self, small_spec):
        with pytest.raises(ValueError):
            evolve_to(initial_state(small_spec), small_spec,
                      EvolveConfig(t_end=1.0, dt=10.0 * small_spec.dt_max))

    def test_jit_and_reference_paths_agree_exactly(self, small_spec):
        cfg_jit = EvolveConfig(t_end=500 * small_spec.dt_max, snapshot_every=100)
        cfg_ref = EvolveConfig(t_end=500 * small_spec.dt_max, snapshot_every=100,
                               use_jit=False)
        res_jit = evolve_to(initial_state(small_spec), small_spec, cfg_jit)
        res_ref = evolve_to(initial_state(small_spec), small_spec, cfg_ref)
        assert np.array_equal(res_jit.state.u.values, res_ref.state.u.values)
        assert np.array_equal(res_jit.state.v.values, res_ref.state.v.values)

    def test_steady_detection_fires_on_settled_run(self, small_spec):
        res = evolve_to(initial_state(small_spec), small_spec,
                        EvolveConfig(t_end=5.0, steady_tol=1e-6))
        assert res.steady
        assert res.t_steady is not None and res.t_steady < 5.0
        assert res.final_rate < 1e-6


class TestDetectSteady:
    def test_thresholding(self):
        grid = Grid(10)
        kin = Kinetics.logistic()
        u = Field.constant(grid, 1.0)
        v = Field.constant(grid, 0.0)
        prev = SystemState(t=0.0, step=0, u=u, v=v)
        moved = SystemState(t=0.1, step=1,
                            u=u.with_values(u.values + 1e-6), v=v)
        # Rate is ||du||/dt = 1e-5 with dt = 0.1; tol sits on either side.
        assert not detect_steady(prev, moved, 0.1, tol=1e-6)
        assert detect_steady(prev, moved, 0.1, tol=1e-3)
