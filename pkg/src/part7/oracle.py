"""Brute-force oracles: grid searches over contracts, dense sign scans, midpoint sums.

Slow on purpose and independent of the solvers' bracketing logic, so the
verifier can hold each solver against them.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.part1.distributions import CashFlowFamily, TypeDistribution
from src.part2.contracts import Contract, PointLocus, ZeroProfitLocus
from src.part4.market_solver import locus_for_pool
from src.utils.errors import DomainError, NoFeasiblePoint
from src.utils.logger_config import setup_solver_logger

logger = setup_solver_logger(name="Oracle")

MIN_GRID_POINTS = 10
MIN_RIEMANN_POINTS = 1000


@dataclass(frozen=True)
class GridSpec:
    d_points: int = 2000
    m_points: int = 2000
    theta_points: int = 200

    def __post_init__(self):
        for name in ("d_points", "m_points", "theta_points"):
            if getattr(self, name) < MIN_GRID_POINTS:
                raise DomainError(f"{name} must be at least {MIN_GRID_POINTS}, got {getattr(self, name)}")


DEFAULT_GRID = GridSpec()


@dataclass(frozen=True)
class OracleResult:
    contract: Contract
    utility: float
    clamped_points: int = 0


def _grid_best(locus: ZeroProfitLocus, lambda_: float, a_bar: float, spec: GridSpec) -> OracleResult:
    ds = np.linspace(locus.d_lo, locus.d_max, spec.d_points)
    with np.errstate(invalid="ignore"):
        m = np.asarray(locus.collateral(ds, lambda_), dtype=float)
    finite = np.isfinite(m)
    clamped = int(np.sum(finite & (m > a_bar)))
    # m < 0 means d alone over-repays; the unsecured contract still breaks even or better
    keep = finite & (m <= a_bar)
    if not np.any(keep):
        raise NoFeasiblePoint(f"no face value on the {spec.d_points}-point grid meets zero profit with m <= {a_bar}")
    ds, m = ds[keep], np.maximum(m[keep], 0.0)
    utilities = np.asarray(locus.utility(ds, m), dtype=float)
    best = int(np.argmax(utilities))
    return OracleResult(Contract(float(ds[best]), float(m[best])), float(utilities[best]), clamped)


def grid_best_on_locus(fam: CashFlowFamily, theta: float, lambda_: float, a_bar: float,
                       spec: GridSpec = DEFAULT_GRID) -> OracleResult:
    """Best contract for a known type among grid points on its zero-profit locus."""
    return _grid_best(PointLocus(fam, theta), lambda_, a_bar, spec)


def grid_best_on_pooled_locus(fam: CashFlowFamily, dist: TypeDistribution, pool: Tuple[float, float],
                              lambda_: float, a_bar: float, spec: GridSpec = DEFAULT_GRID,
                              order: int = 64) -> OracleResult:
    """Same search on the locus priced on a pool's average."""
    return _grid_best(locus_for_pool(fam, dist, pool, order), lambda_, a_bar, spec)


def grid_best_2d(fam: CashFlowFamily, theta: float, lambda_: float, a_bar: float,
                 spec: GridSpec = DEFAULT_GRID) -> OracleResult:
    """Best (d, m) on a full d x m grid among points the financier accepts (profit >= 0).

    Never uses the closed-form locus, so it also checks the collateral formula.
    """
    locus = PointLocus(fam, theta)
    ds = np.linspace(locus.d_lo, locus.d_max, spec.d_points)
    ms = np.linspace(0.0, a_bar, spec.m_points)
    surv = np.asarray(fam.survivor(ds, theta))[:, None]
    partial = np.asarray(fam.partial_expectation(ds, theta))[:, None]
    profit = ds[:, None] * surv + lambda_ * ms[None, :] * (1.0 - surv) - 1.0
    utility = np.where(profit >= 0, partial - ms[None, :] * (1.0 - surv), -np.inf)
    flat = int(np.argmax(utility))
    i, j = np.unravel_index(flat, utility.shape)
    if not np.isfinite(utility[i, j]):
        raise NoFeasiblePoint(f"no grid contract breaks even for theta={theta}")
    return OracleResult(Contract(float(ds[i]), float(ms[j])), float(utility[i, j]))


def scan_sign_changes(fn, interval: Tuple[float, float], points: int = 100) -> List[Tuple[float, float]]:
    """Adjacent grid pairs where fn changes sign; zero counts as nonnegative."""
    if points < MIN_GRID_POINTS:
        raise DomainError(f"sign scan needs at least {MIN_GRID_POINTS} points, got {points}")
    grid = np.linspace(interval[0], interval[1], points)
    values = np.array([fn(float(x)) for x in grid], dtype=float)
    negative = values < 0
    hits = np.flatnonzero(negative[:-1] != negative[1:])
    return [(float(grid[i]), float(grid[i + 1])) for i in hits]


def riemann_integral(fn, interval: Tuple[float, float], points: int = 100_000) -> float:
    """Midpoint rule; fn must accept a numpy array."""
    if points < MIN_RIEMANN_POINTS:
        raise DomainError(f"Riemann sum needs at least {MIN_RIEMANN_POINTS} points, got {points}")
    lo, hi = interval
    if hi <= lo:
        return 0.0
    h = (hi - lo) / points
    mids = lo + h * (np.arange(points) + 0.5)
    return float(np.sum(np.asarray(fn(mids), dtype=float)) * h)
