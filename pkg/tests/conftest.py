"""
Shared pytest fixtures for the secured debt solver.

Three configurations carry most of the suite:
- baseline: exponential cash flows, uniform types on [1, 3], lambda_b=0.9,
  lambda_m=0.85, a_bar=2. Collateral binds at every type and the bank
  serves everyone it finances.
- slack: the same with a_bar=20, so every bank contract is interior.
- reverse wedge: lambda_b=0.85, lambda_m=0.9 behind the diagnostic override,
  the configuration where bank and market coexist.
"""
from pathlib import Path

import pytest

from src.part1.distributions import CashFlowFamily, TypeDistribution, TypeSpace
from src.part3.bank_solver import bank_menu
from src.part5.equilibrium import EquilibriumConfig, solve_equilibrium

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "data" / "scenarios"


@pytest.fixture(scope="session")
def support():
    return TypeSpace(1.0, 3.0)


@pytest.fixture(scope="session")
def exp_family(support):
    """Exponential cash flows with mean theta, checked against [1, 3]."""
    return CashFlowFamily("exponential", support=support)


@pytest.fixture(scope="session")
def free_exp_family():
    """Exponential family without a support check, for single-type examples."""
    return CashFlowFamily("exponential")


@pytest.fixture(scope="session")
def uniform_types(support):
    return TypeDistribution(support)


@pytest.fixture(scope="session")
def baseline_cfg(exp_family, uniform_types):
    return EquilibriumConfig(exp_family, uniform_types, 0.9, 0.85, 2.0)


@pytest.fixture(scope="session")
def slack_cfg(exp_family, uniform_types):
    return EquilibriumConfig(exp_family, uniform_types, 0.9, 0.85, 20.0)


@pytest.fixture(scope="session")
def reverse_cfg(exp_family, uniform_types):
    return EquilibriumConfig(exp_family, uniform_types, 0.85, 0.9, 2.0, allow_wedge_override=True)


@pytest.fixture(scope="session")
def baseline_menu(baseline_cfg):
    cfg = baseline_cfg
    return bank_menu(cfg.fam, cfg.dist, cfg.lambda_b, cfg.a_bar, settings=cfg.settings)


@pytest.fixture(scope="session")
def slack_menu(slack_cfg):
    cfg = slack_cfg
    return bank_menu(cfg.fam, cfg.dist, cfg.lambda_b, cfg.a_bar, settings=cfg.settings)


@pytest.fixture(scope="session")
def baseline_equilibrium(baseline_cfg):
    return solve_equilibrium(baseline_cfg)


@pytest.fixture(scope="session")
def reverse_equilibrium(reverse_cfg):
    return solve_equilibrium(reverse_cfg)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
