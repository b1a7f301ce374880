"""Numerical laboratory for two-species competition-diffusion systems.

The package studies what happens to the reaction-diffusion pair

    u_t = u_xx + f(u) - k u v,      v_t = v_xx + g(v) - alpha k u v

on the unit interval, with inhomogeneous Dirichlet data, as the interaction
strength k grows: time evolution, segregation diagnostics, the scalar limit
problem for w = alpha*u - v, stationary pairs, and spectral certification.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .geometry import Field, Grid, interior_mask, l2_norm, laplacian_dirichlet, linf_norm
from .kinetics import Kinetics, validate_hypothesis_a
from .evolve import (BlowupError, EvolveConfig, EvolveResult, ProblemSpec, SystemState,
                     evolve_to, initial_state, step_scalar_w, step_system)
from .diagnostics import (DiagnosticSnapshot, dist_to_solution_set, energy,
                          projection_error, remainder_R, residual_S,
                          segregation_integral, segregation_pointwise)
from .stationary import (NonConvergenceError, StationaryPair, StationarySolution,
                         UniquenessReport, conserved_quantity, local_uniqueness_probe,
                         shoot_enumerate, solve_Pk_stationary, solve_S_newton,
                         solve_oneeq_monotone)
from .spectra import (GenericityReport, LinearizedOperator, assemble_linearization,
                      genericity_sweep, is_nondegenerate, smallest_magnitude_eigenvalue)
from .scenario import Scenario, ScenarioError, default_scenario_path, load_scenario

__all__ = [
    "__version__",
    "Grid", "Field", "laplacian_dirichlet", "l2_norm", "linf_norm", "interior_mask",
    "Kinetics", "validate_hypothesis_a",
    "ProblemSpec", "SystemState", "EvolveConfig", "EvolveResult", "BlowupError",
    "initial_state", "step_system", "step_scalar_w", "evolve_to",
    "DiagnosticSnapshot", "energy", "residual_S", "remainder_R", "projection_error",
    "segregation_integral", "segregation_pointwise", "dist_to_solution_set",
    "StationarySolution", "StationaryPair", "UniquenessReport", "NonConvergenceError",
    "solve_S_newton", "shoot_enumerate", "conserved_quantity", "solve_oneeq_monotone",
    "solve_Pk_stationary", "local_uniqueness_probe",
    "LinearizedOperator", "GenericityReport", "assemble_linearization",
    "smallest_magnitude_eigenvalue", "is_nondegenerate", "genericity_sweep",
    "Scenario", "ScenarioError", "load_scenario", "default_scenario_path",
]
