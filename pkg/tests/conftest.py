"""Shared fixtures: the default scenario and its enumerated limit solution."""

from __future__ import annotations

import pytest

from seglab.scenario import default_scenario_path, load_scenario
from seglab.stationary import shoot_enumerate


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario(default_scenario_path())


@pytest.fixture(scope="session")
def limit_solution(default_scenario):
    sc = default_scenario
    a, b = sc.bc_w
    sols = shoot_enumerate(sc.grid, sc.kin, a, b, n_scan=400)
    assert len(sols) == 1, f"expected a unique limit profile at bc ({a}, {b}), got {len(sols)}"
    return sols[0]
