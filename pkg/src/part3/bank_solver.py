"""Borrower-optimal zero-profit bank contracts, the bank menu and its IR cutoff.

The bank sees each type. For a given theta it offers the contract that
maximises borrower utility on its zero-profit locus. That is either an
interior tangency, or the contract pinned at the collateral cap, or an
unsecured contract when the tangency would need negative collateral.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.part1.distributions import CashFlowFamily, TypeDistribution
from src.part2.contracts import Contract, PointLocus, ZeroProfitLocus
from src.utils.errors import AllUnfinanceable, DomainError
from src.utils.logger_config import setup_solver_logger
from src.utils.numerics import bisect_root, first_sign_change, golden_section_max

logger = setup_solver_logger(name="BankSolver")

INTERIOR = "interior"
COLLATERAL_BOUND = "collateral_bound"
UNSECURED = "unsecured"
UNFINANCEABLE = "unfinanceable"

EXACT = "exact"
SLOPE_EQUALITY = "slope_equality"
TANGENCY_FORMS = (EXACT, SLOPE_EQUALITY)

BRANCH_TIE_TOL = 1e-9


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs shared by every solver stage."""
    tolerance: float = 1e-10
    residual_tolerance: float = 1e-9
    max_bisection: int = 200
    bracket_points: int = 512
    quadrature_order: int = 64
    menu_size: int = 401
    ir_steps: int = 80
    tangency: str = EXACT

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("solver tolerance must be positive")
        if self.tangency not in TANGENCY_FORMS:
            raise DomainError(f"unknown tangency form '{self.tangency}', expected one of {TANGENCY_FORMS}")
        if self.menu_size < 2:
            raise DomainError("menu needs at least two grid types")
        if self.bracket_points < 10 or self.quadrature_order < 2:
            raise DomainError("bracket scan and quadrature need a sensible resolution")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class LocusSolution:
    d: float
    m: float
    branch: str
    utility: float
    tangency_residual: float
    zero_profit_residual: float


def _exact_maximizer(locus: ZeroProfitLocus, lambda_: float, settings: SolverSettings) -> float:
    tol = settings.tolerance
    d_g, lo, hi = golden_section_max(lambda d: locus.locus_utility(d, lambda_), locus.d_lo, locus.d_max, tol)

    # Golden section stalls where the objective is flat to rounding; finish on the FOC.
    def foc(d):
        return locus.foc_residual(d, lambda_)

    step = max(4.0 * (hi - lo), 1e-7 * (1.0 + d_g))
    for _ in range(60):
        a, b = max(locus.d_lo, d_g - step), min(locus.d_max, d_g + step)
        if foc(a) > 0 > foc(b):
            return bisect_root(foc, a, b, xtol=tol, maxiter=settings.max_bisection)
        if a == locus.d_lo and b == locus.d_max:
            break
        step *= 2.0
    return d_g


def _slope_equality_root(locus: ZeroProfitLocus, lambda_: float, settings: SolverSettings) -> float:
    ds = np.linspace(locus.d_lo, locus.d_max, settings.bracket_points)
    res = locus.slope_equality_residual(ds, lambda_)
    idx = first_sign_change(-res)
    if idx is None:
        # residual never turns negative: utility keeps rising up to the bracket edge
        return locus.d_max if np.all(res > 0) else locus.d_lo
    return bisect_root(lambda d: locus.slope_equality_residual(d, lambda_), ds[idx], ds[idx + 1],
                       xtol=settings.tolerance, maxiter=settings.max_bisection)


def _bound_face_value(locus: ZeroProfitLocus, lambda_: float, a_bar: float, d_from: float,
                      settings: SolverSettings) -> Optional[float]:
    """Smallest d >= d_from with Pi(d, a_bar) >= 0, or None when none exists below d_max.

    A scan brackets the first sign change. When the scan sees none, the
    best scan point is polished by golden section, which catches profitable
    windows narrower than the scan spacing.
    """
    def profit(d):
        return float(locus.profit(d, a_bar, lambda_))

    ds = np.linspace(d_from, locus.d_max, settings.bracket_points)
    profits = locus.profit(ds, a_bar, lambda_)
    if profits[0] >= 0:
        return float(d_from)
    idx = first_sign_change(profits)
    if idx is not None:
        return bisect_root(profit, ds[idx], ds[idx + 1], xtol=settings.tolerance, maxiter=settings.max_bisection)

    best = int(np.argmax(profits))
    left, right = ds[max(best - 1, 0)], ds[min(best + 1, len(ds) - 1)]
    d_peak, _, _ = golden_section_max(profit, left, right, settings.tolerance)
    if profit(d_peak) < 0:
        return None
    # every scan point up to `left` lost money, so [left, d_peak] brackets the first root
    return bisect_root(profit, left, d_peak, xtol=settings.tolerance, maxiter=settings.max_bisection)


def _tangency_residual(locus, d, lambda_, settings):
    if settings.tangency == EXACT:
        return abs(float(locus.foc_residual(d, lambda_)))
    return abs(float(locus.slope_equality_residual(d, lambda_)))


def solve_on_locus(locus: ZeroProfitLocus, lambda_: float, a_bar: float,
                   settings: SolverSettings = DEFAULT_SETTINGS) -> LocusSolution:
    """Borrower-optimal point of a zero-profit locus subject to 0 <= m <= a_bar."""
    if settings.tangency == EXACT:
        d_int = _exact_maximizer(locus, lambda_, settings)
    else:
        d_int = _slope_equality_root(locus, lambda_, settings)
    m_int = float(locus.collateral(d_int, lambda_))

    if m_int < 0:
        # d*G rises on [0, d_int], so m = 0 is reached exactly once below the optimum
        d = bisect_root(lambda x: x * locus.survival(x) - 1.0, locus.d_lo, d_int,
                        xtol=settings.tolerance, maxiter=settings.max_bisection)
        m, branch, tangency = 0.0, UNSECURED, float("nan")
    elif m_int >= a_bar - BRANCH_TIE_TOL:
        d = _bound_face_value(locus, lambda_, a_bar, d_int, settings)
        if d is None:
            return LocusSolution(float("nan"), float("nan"), UNFINANCEABLE, float("-inf"),
                                 float("nan"), float("nan"))
        m, branch, tangency = float(a_bar), COLLATERAL_BOUND, float("nan")
    else:
        d, m, branch = d_int, m_int, INTERIOR
        tangency = _tangency_residual(locus, d, lambda_, settings)

    return LocusSolution(
        d=float(d),
        m=m,
        branch=branch,
        utility=float(locus.utility(d, m)),
        tangency_residual=tangency,
        zero_profit_residual=abs(float(locus.profit(d, m, lambda_))),
    )


@dataclass(frozen=True)
class BankContractSolution:
    theta: float
    contract: Optional[Contract]
    branch: str
    utility: float
    default_prob: float
    tangency_residual: float
    zero_profit_residual: float

    @property
    def financed(self) -> bool:
        return self.branch != UNFINANCEABLE


def _validate_financier(lambda_: float, a_bar: float):
    if not 0 < lambda_ <= 1:
        raise DomainError(f"liquidation efficiency must lie in (0, 1], got {lambda_}")
    if not (np.isfinite(a_bar) and a_bar >= 0):
        raise DomainError(f"collateral cap must be finite and nonnegative, got {a_bar}")


@lru_cache(maxsize=1 << 16)
def solve_bank_contract(fam: CashFlowFamily, theta: float, lambda_b: float, a_bar: float,
                        settings: SolverSettings = DEFAULT_SETTINGS) -> BankContractSolution:
    """Borrower-optimal zero-profit bank contract for a single type."""
    _validate_financier(lambda_b, a_bar)
    locus = PointLocus(fam, theta)
    sol = solve_on_locus(locus, lambda_b, a_bar, settings)
    if sol.branch == UNFINANCEABLE:
        return BankContractSolution(float(theta), None, UNFINANCEABLE, float("-inf"), float("nan"),
                                    float("nan"), float("nan"))
    return BankContractSolution(
        theta=float(theta),
        contract=Contract(sol.d, sol.m),
        branch=sol.branch,
        utility=sol.utility,
        default_prob=float(1.0 - locus.survival(sol.d)),
        tangency_residual=sol.tangency_residual,
        zero_profit_residual=sol.zero_profit_residual,
    )


@dataclass(frozen=True, eq=False)
class BankMenu:
    fam: CashFlowFamily
    dist: TypeDistribution
    lambda_b: float
    a_bar: float
    settings: SolverSettings
    thetas: Tuple[float, ...]
    solutions: Tuple[BankContractSolution, ...]
    ir_cutoff: float

    def _column(self, attr):
        return np.array([getattr(s.contract, attr) if s.financed else np.nan for s in self.solutions])

    @property
    def d(self) -> np.ndarray:
        return self._column("d")

    @property
    def m(self) -> np.ndarray:
        return self._column("m")

    @property
    def utilities(self) -> np.ndarray:
        return np.array([s.utility for s in self.solutions])

    @property
    def default_probs(self) -> np.ndarray:
        return np.array([s.default_prob for s in self.solutions])

    def financed_mask(self) -> np.ndarray:
        """Grid types at or above the IR cutoff with a feasible contract."""
        thetas = np.asarray(self.thetas)
        return (thetas >= self.ir_cutoff) & np.array([s.financed for s in self.solutions])

    def contract_at(self, theta):
        """(d, m) at arbitrary types: linear interpolation between menu nodes.

        Types outside the node range, or next to an unfinanceable node, get an
        exact solve instead.
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        nodes = np.asarray(self.thetas)
        d_nodes, m_nodes = self.d, self.m
        if nodes.size >= 2:
            idx = np.clip(np.searchsorted(nodes, theta, side="right") - 1, 0, nodes.size - 2)
            t0, t1 = nodes[idx], nodes[idx + 1]
            w = (theta - t0) / (t1 - t0)
            d = (1.0 - w) * d_nodes[idx] + w * d_nodes[idx + 1]
            m = (1.0 - w) * m_nodes[idx] + w * m_nodes[idx + 1]
            exact = np.isnan(d) | (theta < nodes[0]) | (theta > nodes[-1])
        else:
            d, m = np.full(theta.shape, np.nan), np.full(theta.shape, np.nan)
            exact = np.ones(theta.shape, dtype=bool)
        for i in np.flatnonzero(exact):
            sol = solve_bank_contract(self.fam, float(theta[i]), self.lambda_b, self.a_bar, self.settings)
            d[i], m[i] = (sol.contract.d, sol.contract.m) if sol.financed else (np.nan, np.nan)
        return d, m

    def restricted(self, lo: float, hi: float) -> "BankMenu":
        """Smallest run of nodes covering [lo, hi]; interpolation inside it matches the full menu."""
        nodes = np.asarray(self.thetas)
        first = max(int(np.searchsorted(nodes, lo, side="right")) - 1, 0)
        last = min(int(np.searchsorted(nodes, hi, side="left")), nodes.size - 1)
        keep = range(first, last + 1)
        return replace(self,
                       thetas=tuple(self.thetas[i] for i in keep),
                       solutions=tuple(self.solutions[i] for i in keep))

    def monotonicity_report(self, tol: float = 1e-9) -> dict:
        """Weak monotonicity of the menu on its financed nodes."""
        mask = self.financed_mask()
        d, m = self.d[mask], self.m[mask]
        u, q = self.utilities[mask], self.default_probs[mask]

        def nonincreasing(x):
            return bool(np.all(np.diff(x) <= tol))

        return {
            "d_nonincreasing": nonincreasing(d),
            "m_nonincreasing": nonincreasing(m),
            "default_prob_nonincreasing": nonincreasing(q),
            "utility_nondecreasing": nonincreasing(-u),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "theta": np.asarray(self.thetas),
            "d": self.d,
            "m": self.m,
            "branch": [s.branch for s in self.solutions],
            "utility": self.utilities,
            "default_prob": self.default_probs,
        })


def _utility_at(fam, theta, lambda_b, a_bar, settings):
    return solve_bank_contract(fam, float(theta), lambda_b, a_bar, settings).utility


def _ir_cutoff(fam, dist, lambda_b, a_bar, thetas, utilities, settings) -> float:
    if utilities[0] > 0:
        return float(thetas[0])
    positive = np.flatnonzero(utilities > 0)
    if positive.size == 0:
        logger.warning("No type gains from bank finance; IR cutoff set to the top type")
        return float(thetas[-1])
    lo, hi = float(thetas[positive[0] - 1]), float(thetas[positive[0]])
    for _ in range(settings.ir_steps):
        mid = 0.5 * (lo + hi)
        if _utility_at(fam, mid, lambda_b, a_bar, settings) > 0:
            hi = mid
        else:
            lo = mid
    # the financed side of the bracket, so U_b at the cutoff is never -inf
    return hi


def bank_menu(fam: CashFlowFamily, dist: TypeDistribution, lambda_b: float, a_bar: float,
              grid_size: Optional[int] = None, settings: SolverSettings = DEFAULT_SETTINGS) -> BankMenu:
    """Solve the bank contract on a uniform type grid and locate the IR cutoff."""
    grid_size = settings.menu_size if grid_size is None else grid_size
    if grid_size < 2:
        raise DomainError("bank menu needs grid_size >= 2")
    thetas = dist.support.grid(grid_size)
    solutions = tuple(solve_bank_contract(fam, float(t), lambda_b, a_bar, settings) for t in thetas)
    if not any(s.financed for s in solutions):
        raise AllUnfinanceable(f"no type in [{thetas[0]:.6g}, {thetas[-1]:.6g}] is financeable "
                               f"at lambda_b={lambda_b}, a_bar={a_bar}")

    utilities = np.array([s.utility for s in solutions])
    ir_cutoff = _ir_cutoff(fam, dist, lambda_b, a_bar, thetas, utilities, settings)

    branches = pd.Series([s.branch for s in solutions]).value_counts().to_dict()
    logger.debug(f"Bank menu lambda_b={lambda_b}, a_bar={a_bar}: branches {branches}, IR cutoff {ir_cutoff:.9g}")

    return BankMenu(fam=fam, dist=dist, lambda_b=lambda_b, a_bar=a_bar, settings=settings,
                    thetas=tuple(float(t) for t in thetas), solutions=solutions, ir_cutoff=ir_cutoff)


@dataclass(frozen=True)
class ComparativeStatic:
    param: str
    delta: float
    base: BankContractSolution
    perturbed: BankContractSolution
    d: float
    m: float
    default_prob: float
    utility: float
    branch_changed: bool


def bank_comparative_static(fam: CashFlowFamily, theta: float, lambda_b: float, a_bar: float,
                            param: str = "lambda_b", delta: float = 1e-3,
                            settings: SolverSettings = DEFAULT_SETTINGS) -> ComparativeStatic:
    """Signed finite-difference response of the bank contract to lambda_b or a_bar."""
    if param not in ("lambda_b", "a_bar"):
        raise DomainError(f"comparative static over '{param}' is not supported")
    if not delta > 0:
        raise DomainError("perturbation must be positive")
    if param == "lambda_b" and lambda_b + delta > 1:
        raise DomainError(f"lambda_b={lambda_b} cannot rise by {delta} inside (0, 1]")

    base = solve_bank_contract(fam, theta, lambda_b, a_bar, settings)
    if param == "lambda_b":
        perturbed = solve_bank_contract(fam, theta, lambda_b + delta, a_bar, settings)
    else:
        perturbed = solve_bank_contract(fam, theta, lambda_b, a_bar + delta, settings)

    branch_changed = base.branch != perturbed.branch
    if branch_changed:
        logger.warning(f"Perturbing {param} by {delta} moves theta={theta} from {base.branch} to {perturbed.branch}")

    def diff(attr):
        if not (base.financed and perturbed.financed):
            return float("nan")
        return getattr(perturbed.contract, attr) - getattr(base.contract, attr)

    return ComparativeStatic(
        param=param,
        delta=delta,
        base=base,
        perturbed=perturbed,
        d=diff("d"),
        m=diff("m"),
        default_prob=perturbed.default_prob - base.default_prob,
        utility=perturbed.utility - base.utility,
        branch_changed=branch_changed,
    )


def ir_cutoff_comparative_static(fam: CashFlowFamily, dist: TypeDistribution, lambda_b: float, a_bar: float,
                                 param: str = "lambda_b", delta: float = 1e-3, grid_size: Optional[int] = None,
                                 settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Change in the IR cutoff when lambda_b or a_bar rises by delta."""
    if param == "lambda_b" and lambda_b + delta > 1:
        raise DomainError(f"lambda_b={lambda_b} cannot rise by {delta} inside (0, 1]")
    base = bank_menu(fam, dist, lambda_b, a_bar, grid_size, settings)
    if param == "lambda_b":
        moved = bank_menu(fam, dist, lambda_b + delta, a_bar, grid_size, settings)
    elif param == "a_bar":
        moved = bank_menu(fam, dist, lambda_b, a_bar + delta, grid_size, settings)
    else:
        raise DomainError(f"comparative static over '{param}' is not supported")
    return moved.ir_cutoff - base.ir_cutoff
