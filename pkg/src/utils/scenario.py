"""Scenario files: flat ``key = value`` text with dotted keys and ``#`` comments."""
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from src.part1.distributions import CashFlowFamily, TypeDistribution, TypeSpace
from src.part3.bank_solver import EXACT, SolverSettings
from src.part5.equilibrium import EquilibriumConfig
from src.part7.oracle import GridSpec
from src.utils.errors import ConfigError, DomainError
from src.utils.logger_config import setup_solver_logger

logger = setup_solver_logger(name="Scenario")

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got '{raw}'")


# dotted key -> (ScenarioConfig field, parser)
KEYS = {
    "family.kind": ("family_kind", str),
    "family.sigma": ("sigma", float),
    "types.kind": ("types_kind", str),
    "types.theta_lo": ("theta_lo", float),
    "types.theta_hi": ("theta_hi", float),
    "types.alpha": ("alpha", float),
    "types.beta": ("beta", float),
    "types.trim": ("trim", float),
    "bank.lambda": ("lambda_b", float),
    "market.lambda": ("lambda_m", float),
    "collateral.a_bar": ("a_bar", float),
    "grid.types": ("grid_types", int),
    "grid.quadrature": ("quadrature", int),
    "grid.oracle_d_points": ("oracle_d_points", int),
    "grid.oracle_m_points": ("oracle_m_points", int),
    "grid.oracle_theta_points": ("oracle_theta_points", int),
    "solver.tolerance": ("tolerance", float),
    "solver.residual_tolerance": ("residual_tolerance", float),
    "solver.max_bisection": ("max_bisection", int),
    "solver.tangency": ("tangency", str),
    "diagnostics.allow_wedge_override": ("allow_wedge_override", _parse_bool),
    "output.path": ("output_path", str),
}

REQUIRED_KEYS = ("types.theta_lo", "types.theta_hi", "bank.lambda", "market.lambda", "collateral.a_bar")


@dataclass(frozen=True)
class ScenarioConfig:
    theta_lo: float
    theta_hi: float
    lambda_b: float
    lambda_m: float
    a_bar: float
    family_kind: str = "exponential"
    sigma: float = 0.5
    types_kind: str = "uniform"
    alpha: float = 2.0
    beta: float = 2.0
    trim: float = 0.01
    grid_types: int = 401
    quadrature: int = 64
    oracle_d_points: int = 2000
    oracle_m_points: int = 2000
    oracle_theta_points: int = 200
    tolerance: float = 1e-10
    residual_tolerance: float = 1e-9
    max_bisection: int = 200
    tangency: str = EXACT
    allow_wedge_override: bool = False
    output_path: str = "output"

    def settings(self) -> SolverSettings:
        return SolverSettings(
            tolerance=self.tolerance,
            residual_tolerance=self.residual_tolerance,
            max_bisection=self.max_bisection,
            quadrature_order=self.quadrature,
            menu_size=self.grid_types,
            tangency=self.tangency,
        )

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.oracle_d_points, self.oracle_m_points, self.oracle_theta_points)

    def equilibrium_config(self) -> EquilibriumConfig:
        """Build the solver primitives; any violated invariant surfaces as ConfigError."""
        try:
            support = TypeSpace(self.theta_lo, self.theta_hi)
            dist = TypeDistribution(support, self.types_kind, self.alpha, self.beta, self.trim)
            fam = CashFlowFamily(self.family_kind, self.sigma, support)
            return EquilibriumConfig(fam, dist, self.lambda_b, self.lambda_m, self.a_bar,
                                     self.settings(), self.allow_wedge_override)
        except ConfigError:
            raise
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> "ScenarioConfig":
        self.equilibrium_config()
        try:
            self.grid_spec()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def parse_pairs(lines: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """Raw dotted-key pairs; later keys override earlier ones."""
    pairs = {}
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got '{line.strip()}'")
        key, value = (part.strip() for part in text.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{number}: unknown key '{key}'")
        pairs[key] = value
    return pairs


def parse_overrides(overrides: Optional[Iterable[str]]) -> Dict[str, str]:
    return parse_pairs(overrides or [], source="--set")


def build_scenario(pairs: Dict[str, str]) -> ScenarioConfig:
    missing = [key for key in REQUIRED_KEYS if key not in pairs]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    values = {}
    for key, raw in pairs.items():
        name, parser = KEYS[key]
        try:
            values[name] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {exc}") from exc
    return ScenarioConfig(**values).validate()


def load_scenario(path, overrides: Optional[Iterable[str]] = None) -> ScenarioConfig:
    """Read a scenario file and apply ``key=value`` overrides before validation."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario '{path}': {exc}") from exc
    pairs = parse_pairs(text.splitlines(), source=str(path))
    pairs.update(parse_overrides(overrides))
    scenario = build_scenario(pairs)
    logger.debug(f"Loaded scenario {path.name}: lambda_b={scenario.lambda_b}, lambda_m={scenario.lambda_m}, "
                 f"a_bar={scenario.a_bar}")
    return scenario


SWEEP_PARAMS = {"lambda_m": "lambda_m", "lambda_b": "lambda_b", "a_bar": "a_bar", "sigma": "sigma"}


@dataclass(frozen=True)
class SweepSpec:
    param: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"cannot sweep '{self.param}', expected one of {sorted(SWEEP_PARAMS)}")
        if not self.lo < self.hi:
            raise ConfigError(f"sweep range must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.steps < 2:
            raise ConfigError(f"a sweep needs at least 2 steps, got {self.steps}")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def apply(self, scenario: ScenarioConfig, value: float) -> ScenarioConfig:
        """Scenario with the swept field set; validation is left to the caller's row."""
        return replace(scenario, **{SWEEP_PARAMS[self.param]: float(value)})

