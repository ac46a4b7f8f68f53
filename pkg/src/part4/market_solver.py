"""Pooled secured bond contract and the market-only participation fixed point.

The market cannot see types. It prices one contract on the average of the
pool [theta_a, theta_b] it attracts. The optimisation reuses the bank
machinery with pool-averaged moments in place of type-specific ones.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from src.part1.distributions import CashFlowFamily, TypeDistribution, pool_weights, DEGENERATE_MASS
from src.part2.contracts import (Contract, PointLocus, ZeroProfitLocus, D_LO_LEVEL, D_MAX_LEVEL,
                                 borrower_utility)
from src.part3.bank_solver import (DEFAULT_SETTINGS, COLLATERAL_BOUND, UNFINANCEABLE,
                                   SolverSettings, solve_on_locus)
from src.utils.errors import DomainError, MarketUnravels
from src.utils.logger_config import setup_solver_logger

logger = setup_solver_logger(name="MarketSolver")

COLLATERAL_CAPPED = "collateral_capped"
INFEASIBLE = "infeasible"

_BRANCH_NAMES = {COLLATERAL_BOUND: COLLATERAL_CAPPED, UNFINANCEABLE: INFEASIBLE}

PARTICIPATION_SCAN_POINTS = 41


class PooledLocus(ZeroProfitLocus):
    """Zero-profit locus priced on the F-average of a pool of types."""

    def __init__(self, fam: CashFlowFamily, dist: TypeDistribution, pool: Tuple[float, float], order: int = 64):
        self.fam = fam
        self.pool = (float(pool[0]), float(pool[1]))
        self.nodes, self.weights = pool_weights(dist, self.pool, order)
        # the safest type has the largest quantiles, so its bracket covers every member
        self.d_lo = float(fam.quantile(D_LO_LEVEL, self.pool[1]))
        self.d_max = float(fam.quantile(D_MAX_LEVEL, self.pool[1]))

    def _average(self, fn, d):
        values = fn(np.asarray(d, dtype=float)[..., None], self.nodes)
        out = np.asarray(values) @ self.weights
        return out[()] if out.ndim == 0 else out

    def survival(self, d):
        return self._average(self.fam.survivor, d)

    def density(self, d):
        return self._average(self.fam.density, d)

    def partial(self, d):
        return self._average(self.fam.partial_expectation, d)


def locus_for_pool(fam: CashFlowFamily, dist: TypeDistribution, pool: Tuple[float, float],
                   order: int = 64) -> ZeroProfitLocus:
    """Pooled locus, or the point-mass locus when the pool carries no mass."""
    theta_a, theta_b = pool
    if theta_a == theta_b:
        return PointLocus(fam, theta_a)
    if dist.mass(theta_a, theta_b) < DEGENERATE_MASS:
        return PointLocus(fam, 0.5 * (theta_a + theta_b))
    return PooledLocus(fam, dist, pool, order)


@dataclass(frozen=True)
class MarketContract:
    contract: Optional[Contract]
    pool: Tuple[float, float]
    branch: str
    utility: float
    pool_tangency_residual: float
    zero_profit_residual: float
    lambda_m: float
    a_bar: float
    point_mass: bool = False

    @property
    def feasible(self) -> bool:
        return self.branch != INFEASIBLE

    def utility_of(self, fam: CashFlowFamily, theta: float) -> float:
        """Utility of type theta under this pooled contract (-inf when infeasible)."""
        if not self.feasible:
            return float("-inf")
        return borrower_utility(fam, theta, self.contract)


@lru_cache(maxsize=1 << 14)
def solve_market_contract(fam: CashFlowFamily, dist: TypeDistribution, pool: Tuple[float, float],
                          lambda_m: float, a_bar: float,
                          settings: SolverSettings = DEFAULT_SETTINGS) -> MarketContract:
    """Borrower-optimal pooled contract on the market's zero-profit locus for the pool."""
    if not 0 < lambda_m <= 1:
        raise DomainError(f"market liquidation efficiency must lie in (0, 1], got {lambda_m}")
    if not (np.isfinite(a_bar) and a_bar >= 0):
        raise DomainError(f"collateral cap must be finite and nonnegative, got {a_bar}")
    theta_a, theta_b = float(pool[0]), float(pool[1])
    dist.support.require([theta_a, theta_b])
    if theta_a > theta_b:
        raise DomainError(f"pool bounds reversed: [{theta_a}, {theta_b}]")

    locus = locus_for_pool(fam, dist, (theta_a, theta_b), settings.quadrature_order)
    sol = solve_on_locus(locus, lambda_m, a_bar, settings)
    branch = _BRANCH_NAMES.get(sol.branch, sol.branch)
    point_mass = isinstance(locus, PointLocus)
    if branch == INFEASIBLE:
        return MarketContract(None, (theta_a, theta_b), INFEASIBLE, float("-inf"), float("nan"), float("nan"),
                              lambda_m, a_bar, point_mass)
    return MarketContract(
        contract=Contract(sol.d, sol.m),
        pool=(theta_a, theta_b),
        branch=branch,
        utility=sol.utility,
        pool_tangency_residual=sol.tangency_residual,
        zero_profit_residual=sol.zero_profit_residual,
        lambda_m=lambda_m,
        a_bar=a_bar,
        point_mass=point_mass,
    )


@dataclass(frozen=True)
class MarketOnlyRegime:
    participation_cutoff: float
    contract: MarketContract
    multiple_fixed_points: bool = False


def _participation_gap(fam, dist, lambda_m, a_bar, settings, cutoff):
    """Utility of the marginal type when the pool is [cutoff, theta_hi]."""
    pool = (float(cutoff), dist.support.theta_hi)
    mc = solve_market_contract(fam, dist, pool, lambda_m, a_bar, settings)
    return mc.utility_of(fam, float(cutoff))


def solve_market_only(fam: CashFlowFamily, dist: TypeDistribution, lambda_m: float, a_bar: float,
                      settings: SolverSettings = DEFAULT_SETTINGS,
                      scan_points: int = PARTICIPATION_SCAN_POINTS) -> MarketOnlyRegime:
    """Market-only regime: cutoff where the marginal type just breaks even under the pool it induces."""
    lo, hi = dist.support.theta_lo, dist.support.theta_hi

    def gap(t):
        return _participation_gap(fam, dist, lambda_m, a_bar, settings, t)

    multiple = False
    if gap(lo) > 0:
        cutoff = lo
    else:
        grid = np.linspace(lo, hi, scan_points)
        values = np.array([gap(t) for t in grid])
        ups = np.flatnonzero((values[:-1] <= 0) & (values[1:] > 0))
        if ups.size == 0:
            raise MarketUnravels(f"no participation cutoff at lambda_m={lambda_m}, a_bar={a_bar}")
        multiple = ups.size > 1
        if multiple:
            logger.warning(f"Market-only participation has {ups.size} fixed points; keeping the most inclusive pool")
        a, b = float(grid[ups[0]]), float(grid[ups[0] + 1])
        for _ in range(settings.max_bisection):
            if b - a <= settings.tolerance:
                break
            mid = 0.5 * (a + b)
            if gap(mid) > 0:
                b = mid
            else:
                a = mid
        cutoff = 0.5 * (a + b)

    contract = solve_market_contract(fam, dist, (float(cutoff), hi), lambda_m, a_bar, settings)
    logger.debug(f"Market-only cutoff {cutoff:.9g} at lambda_m={lambda_m}, branch {contract.branch}")
    return MarketOnlyRegime(participation_cutoff=float(cutoff), contract=contract, multiple_fixed_points=multiple)
