"""Scenario files: the YAML schema that configures every lab run.

A scenario bundles kinetics, grid, boundary/initial profiles, the k sweep,
evolution controls and probe parameters. Profiles are either expression
strings in the variable x (evaluated with a small whitelist of numpy
functions) or explicit node tables of length n_interior + 2 covering
[0, 1] endpoints included.

Schema (version 1), all blocks optional unless marked:

    schema_version: 1            # required
    name: default
    seed: 12345
    alpha: 1.0
    kinetics: {kind: logistic}   # or kind: polynomial with f_coeffs/g_coeffs
    grid: {n_interior: 400}
    boundary: {m1: "2*(1 - x)", m2: "2*x"}   # required
    k_values: [100.0, 1000.0, 10000.0]       # required, strictly increasing
    evolve: {t_end: 50.0, dt: null, snapshot_every: 2000, steady_tol: 1.0e-6}
    region: {beta: 1.0, xi: 0.25}
    shooting: {slope_lo: -50.0, slope_hi: 50.0, n_scan: 2000}
    probes: {n_seeds: 8, radius: 0.05, n_perturb: 50, magnitude: 0.1,
             sweep_n_scan: 400}
    tolerances: {newton: 1.0e-9, oneeq: 1.0e-10, pair: 1.0e-9}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .evolve import EvolveConfig, ProblemSpec
from .geometry import Field, Grid
from .kinetics import Kinetics

SCHEMA_VERSION = 1

_TOP_LEVEL_KEYS = {
    "schema_version", "name", "seed", "alpha", "kinetics", "grid", "boundary",
    "k_values", "evolve", "region", "shooting", "probes", "tolerances",
}

# Names visible to boundary expression strings.
_EXPR_ENV = {
    "pi": np.pi,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "where": np.where,
}


class ScenarioError(ValueError):
    """A scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class ShootingConfig:
    slope_lo: float = -50.0
    slope_hi: float = 50.0
    n_scan: int = 2000

    def __post_init__(self) -> None:
        if not self.slope_lo < self.slope_hi:
            raise ScenarioError(
                f"shooting slope range is empty: [{self.slope_lo}, {self.slope_hi}]"
            )
        if self.n_scan < 16:
            raise ScenarioError(f"shooting n_scan must be >= 16, got {self.n_scan}")


@dataclass(frozen=True)
class ProbeConfig:
    n_seeds: int = 8
    radius: float = 0.05
    n_perturb: int = 50
    magnitude: float = 0.1
    sweep_n_scan: int = 400

    def __post_init__(self) -> None:
        if self.n_seeds < 1 or self.n_perturb < 1:
            raise ScenarioError("probe counts must be >= 1")
        if self.radius < 0.0 or self.magnitude < 0.0:
            raise ScenarioError("probe radius and magnitude must be >= 0")


@dataclass(frozen=True)
class ToleranceConfig:
    newton: float = 1e-9
    oneeq: float = 1e-10
    pair: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("newton", "oneeq", "pair"):
            if getattr(self, name) <= 0.0:
                raise ScenarioError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class Scenario:
    """A fully validated lab configuration; see the module docstring for the schema."""

    name: str
    seed: int
    kin: Kinetics
    grid: Grid
    m1: Field
    m2: Field
    k_values: tuple[float, ...]
    evolve: EvolveConfig
    beta: float
    xi: float
    shooting: ShootingConfig
    probes: ProbeConfig
    tolerances: ToleranceConfig
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def bc_w(self) -> tuple[float, float]:
        """Boundary values of the combination alpha*m1 - m2."""
        a = self.kin.alpha
        return (a * self.m1.left - self.m2.left, a * self.m1.right - self.m2.right)

    def problem_for(self, k: float) -> ProblemSpec:
        return ProblemSpec(grid=self.grid, kin=self.kin, k=k, m1=self.m1,
                           m2=self.m2, beta=self.beta, xi=self.xi)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError(f"scenario must be a mapping, got {type(data).__name__}")
        unknown = set(data) - _TOP_LEVEL_KEYS
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(
                f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
            )

        name = str(data.get("name", "unnamed"))
        seed = _as_int(data.get("seed", 0), "seed")
        alpha = _as_float(data.get("alpha", 1.0), "alpha")
        kin = _build_kinetics(data.get("kinetics", {"kind": "logistic"}), alpha)
        grid = Grid(_as_int(_block(data, "grid").get("n_interior", 400), "grid.n_interior"))

        boundary = _block(data, "boundary")
        if "m1" not in boundary or "m2" not in boundary:
            raise ScenarioError("boundary block must define both m1 and m2")
        m1 = _build_profile(boundary["m1"], grid, "m1")
        m2 = _build_profile(boundary["m2"], grid, "m2")

        k_raw = data.get("k_values")
        if not isinstance(k_raw, (list, tuple)) or not k_raw:
            raise ScenarioError("k_values must be a non-empty list")
        k_values = tuple(_as_float(k, "k_values entry") for k in k_raw)
        if any(b <= a for a, b in zip(k_values, k_values[1:])):
            raise ScenarioError(f"k_values must be strictly increasing, got {k_values}")

        ev = _block(data, "evolve")
        try:
            evolve = EvolveConfig(
                t_end=_as_float(ev.get("t_end", 50.0), "evolve.t_end"),
                dt=None if ev.get("dt") is None else _as_float(ev["dt"], "evolve.dt"),
                snapshot_every=_as_int(ev.get("snapshot_every", 2000), "evolve.snapshot_every"),
                steady_tol=_as_float(ev.get("steady_tol", 1e-6), "evolve.steady_tol"),
            )
        except ValueError as exc:
            raise ScenarioError(f"bad evolve block: {exc}") from exc

        region = _block(data, "region")
        beta = _as_float(region.get("beta", 1.0), "region.beta")
        xi = _as_float(region.get("xi", 0.25), "region.xi")

        try:
            shooting = ShootingConfig(**_typed_block(data, "shooting", ShootingConfig))
            probes = ProbeConfig(**_typed_block(data, "probes", ProbeConfig))
            tolerances = ToleranceConfig(**_typed_block(data, "tolerances", ToleranceConfig))
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc

        scenario = cls(
            name=name, seed=seed, kin=kin, grid=grid, m1=m1, m2=m2,
            k_values=k_values, evolve=evolve, beta=beta, xi=xi,
            shooting=shooting, probes=probes, tolerances=tolerances, raw=data,
        )
        for k in k_values:
            try:
                scenario.problem_for(k)
            except ValueError as exc:
                raise ScenarioError(f"scenario invalid at k={k:g}: {exc}") from exc
        return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario YAML file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {exc}") from exc
    return Scenario.from_dict(data)


def default_scenario_path() -> Path:
    """Path of the packaged default scenario (the standard acceptance setup)."""
    return Path(resources.files("seglab").joinpath("scenarios", "default.yaml"))


def _block(data: dict, key: str) -> dict:
    block = data.get(key, {})
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ScenarioError(f"{key} block must be a mapping")
    return block


def _typed_block(data: dict, key: str, cls) -> dict:
    block = _block(data, key)
    allowed = set(cls.__dataclass_fields__)
    unknown = set(block) - allowed
    if unknown:
        raise ScenarioError(f"unknown {key} keys: {sorted(unknown)}")
    return block


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where} must be an integer, got {value!r}")
    return value


def _build_kinetics(block, alpha: float) -> Kinetics:
    if not isinstance(block, dict):
        raise ScenarioError("kinetics block must be a mapping")
    kind = block.get("kind", "logistic")
    try:
        if kind == "logistic":
            extra = set(block) - {"kind"}
            if extra:
                raise ScenarioError(f"unexpected kinetics keys for logistic: {sorted(extra)}")
            return Kinetics.logistic(alpha=alpha)
        if kind == "polynomial":
            extra = set(block) - {"kind", "f_coeffs", "g_coeffs"}
            if extra:
                raise ScenarioError(f"unexpected kinetics keys: {sorted(extra)}")
            if "f_coeffs" not in block or "g_coeffs" not in block:
                raise ScenarioError("polynomial kinetics needs f_coeffs and g_coeffs")
            return Kinetics.from_polynomials(block["f_coeffs"], block["g_coeffs"], alpha=alpha)
    except ValueError as exc:
        raise ScenarioError(f"bad kinetics: {exc}") from exc
    raise ScenarioError(f"unknown kinetics kind {kind!r} (use logistic or polynomial)")


def _build_profile(entry, grid: Grid, name: str) -> Field:
    """Turn an expression string or node table into a Field on the grid."""
    if isinstance(entry, str):
        x = grid.nodes_with_boundary
        env = dict(_EXPR_ENV, x=x)
        try:
            values = eval(entry, {"__builtins__": {}}, env)  # noqa: S307 - whitelist env
        except Exception as exc:
            raise ScenarioError(f"cannot evaluate {name} expression {entry!r}: {exc}") from exc
        full = np.broadcast_to(np.asarray(values, dtype=float), x.shape).copy()
    elif isinstance(entry, (list, tuple)):
        full = np.asarray(entry, dtype=float)
        if full.shape != (grid.n_interior + 2,):
            raise ScenarioError(
                f"{name} node table must have n_interior + 2 = {grid.n_interior + 2} "
                f"entries, got {len(entry)}"
            )
    elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
        full = np.full(grid.n_interior + 2, float(entry))
    else:
        raise ScenarioError(f"{name} must be an expression string, number or node table")
    if not np.all(np.isfinite(full)):
        raise ScenarioError(f"{name} evaluates to non-finite values")
    return Field(grid, full[1:-1], float(full[0]), float(full[-1]))
