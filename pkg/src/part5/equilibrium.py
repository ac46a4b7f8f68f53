"""Bank-market equilibrium with monotone selection.

Types in [theta_ir, theta_star) take their bank contract; types in
[theta_star, theta_hi] take the pooled market contract priced on exactly
that pool. theta_star is the fixed point of the inner cutoff map.

Corners are read off scans over the conjectured pool, and every candidate
is checked for monotone selection before it is reported. A configuration
where the market would rather take the low types than the high ones has no
equilibrium of this shape and is reported as such.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from src.part1.distributions import CashFlowFamily, TypeDistribution
from src.part3.bank_solver import (DEFAULT_SETTINGS, BankMenu, SolverSettings, bank_menu,
                                   solve_bank_contract)
from src.part4.market_solver import (MarketContract, solve_market_contract, solve_market_only)
from src.utils.errors import AllUnfinanceable, ConfigError, MarketUnravels, NoConvergence
from src.utils.logger_config import setup_solver_logger

logger = setup_solver_logger(name="Equilibrium")

COEXISTENCE = "coexistence"
ALL_BANK = "all_bank"
ALL_MARKET = "all_market"
NO_FINANCE = "no_finance"
# both financiers lend, but no cutoff puts the bank below the market
NO_MONOTONE = "no_monotone_equilibrium"
REGIMES = (COEXISTENCE, ALL_BANK, ALL_MARKET, NO_FINANCE, NO_MONOTONE)

CORNER_SCAN_POINTS = 41
SELECTION_TOL = 1e-8


@dataclass(frozen=True)
class EquilibriumConfig:
    fam: CashFlowFamily
    dist: TypeDistribution
    lambda_b: float
    lambda_m: float
    a_bar: float
    settings: SolverSettings = DEFAULT_SETTINGS
    allow_wedge_override: bool = False

    def __post_init__(self):
        for name in ("lambda_b", "lambda_m"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {value}")
        if not (np.isfinite(self.a_bar) and self.a_bar >= 0):
            raise ConfigError(f"a_bar must be finite and nonnegative, got {self.a_bar}")
        if not self.allow_wedge_override and not self.lambda_m < self.lambda_b:
            raise ConfigError(
                f"Assumption 4 violated: need lambda_m < lambda_b, got lambda_m={self.lambda_m}, "
                f"lambda_b={self.lambda_b}"
            )

    @property
    def delta(self) -> float:
        return self.lambda_b - self.lambda_m

    @property
    def theta_lo(self) -> float:
        return self.dist.support.theta_lo

    @property
    def theta_hi(self) -> float:
        return self.dist.support.theta_hi


@dataclass(frozen=True)
class InnerCutoff:
    root: Optional[float]
    phi_lo: float
    phi_hi: float


@dataclass(frozen=True, eq=False)
class Equilibrium:
    config: EquilibriumConfig
    regime: str
    ir_cutoff: float
    star_cutoff: float
    bank_menu: Optional[BankMenu]
    market_contract: Optional[MarketContract]
    diagnostics: dict = field(default_factory=dict)

    @property
    def market_pool(self):
        return (self.star_cutoff, self.config.theta_hi)


class EquilibriumSolver:
    """Holds one configuration and evaluates the cutoff maps for it."""

    def __init__(self, cfg: EquilibriumConfig):
        self.cfg = cfg
        self._menu = None

    @property
    def menu(self) -> BankMenu:
        if self._menu is None:
            cfg = self.cfg
            self._menu = bank_menu(cfg.fam, cfg.dist, cfg.lambda_b, cfg.a_bar, settings=cfg.settings)
        return self._menu

    def bank_utility(self, theta: float) -> float:
        cfg = self.cfg
        return solve_bank_contract(cfg.fam, float(theta), cfg.lambda_b, cfg.a_bar, cfg.settings).utility

    def market_contract(self, vartheta: float) -> MarketContract:
        cfg = self.cfg
        return solve_market_contract(cfg.fam, cfg.dist, (float(vartheta), cfg.theta_hi),
                                     cfg.lambda_m, cfg.a_bar, cfg.settings)

    def utility_gap(self, theta: float, vartheta: float) -> float:
        """Phi(theta; vartheta) = U_b(theta) - U_m(theta) with the market priced on [vartheta, theta_hi]."""
        mc = self.market_contract(vartheta)
        if not mc.feasible:
            return float("inf")
        u_bank = self.bank_utility(theta)
        if u_bank == float("-inf"):
            return float("-inf")
        return u_bank - mc.utility_of(self.cfg.fam, float(theta))

    def inner_cutoff(self, vartheta: float) -> InnerCutoff:
        """Root of Phi(.; vartheta) on [theta_ir, theta_hi], or None with the endpoint signs."""
        lo, hi = self.menu.ir_cutoff, self.cfg.theta_hi
        phi_lo, phi_hi = self.utility_gap(lo, vartheta), self.utility_gap(hi, vartheta)
        if phi_lo == 0:
            return InnerCutoff(lo, phi_lo, phi_hi)
        if phi_hi == 0:
            return InnerCutoff(hi, phi_lo, phi_hi)
        if (phi_lo > 0) == (phi_hi > 0):
            return InnerCutoff(None, phi_lo, phi_hi)
        bank_below = phi_lo > 0
        a, b = lo, hi
        for _ in range(self.cfg.settings.max_bisection):
            if b - a <= self.cfg.settings.tolerance:
                break
            mid = 0.5 * (a + b)
            # ties go to the bank
            if (self.utility_gap(mid, vartheta) >= 0) == bank_below:
                a = mid
            else:
                b = mid
        return InnerCutoff(0.5 * (a + b), phi_lo, phi_hi)

    def gamma(self, vartheta: float) -> float:
        """theta_star(vartheta) - vartheta, with one-signed gaps clamped to the matching corner."""
        inner = self.inner_cutoff(vartheta)
        if inner.root is not None:
            star = inner.root
        elif inner.phi_lo > 0:
            star = self.cfg.theta_hi
        else:
            star = self.menu.ir_cutoff
        return star - vartheta

    def _without_bank(self, reason: str) -> Equilibrium:
        cfg = self.cfg
        try:
            regime = solve_market_only(cfg.fam, cfg.dist, cfg.lambda_m, cfg.a_bar, cfg.settings)
        except MarketUnravels:
            logger.info(f"No finance: {reason} and the market unravels")
            return Equilibrium(cfg, NO_FINANCE, cfg.theta_hi, cfg.theta_hi, None, None, {"reason": reason})
        cut = regime.participation_cutoff
        return Equilibrium(cfg, ALL_MARKET, cfg.theta_hi, cut, None, regime.contract, {"reason": reason})

    def selection_violations(self, star: float, points: int = CORNER_SCAN_POINTS) -> int:
        """Grid types that break monotone selection when the market prices [star, theta_hi].

        Types below star must weakly prefer the bank, types above it the market.
        """
        lo, hi = self.menu.ir_cutoff, self.cfg.theta_hi
        count = 0
        for theta in np.linspace(lo, hi, points):
            gap = self.utility_gap(float(theta), star)
            if (theta < star and gap < -SELECTION_TOL) or (theta > star and gap > SELECTION_TOL):
                count += 1
        return count

    def corner_scan(self, points: int = CORNER_SCAN_POINTS) -> dict:
        """Phi at the lowest and the top financed type for conjectured pools [vartheta, theta_hi]."""
        lo, hi = self.menu.ir_cutoff, self.cfg.theta_hi
        varthetas = np.linspace(lo, hi, points)
        phi_ir = np.array([self.utility_gap(lo, float(v)) for v in varthetas])
        phi_top = np.array([self.utility_gap(hi, float(v)) for v in varthetas])
        return {"varthetas": varthetas, "phi_ir": phi_ir, "phi_top": phi_top}

    def solve(self) -> Equilibrium:
        cfg = self.cfg
        try:
            menu = self.menu
        except AllUnfinanceable:
            return self._without_bank("bank finances no type")
        lo, hi = menu.ir_cutoff, cfg.theta_hi
        if self.bank_utility(hi) <= 0:
            return self._without_bank("no type gains from bank finance")

        scan = self.corner_scan()
        psi_top = self.utility_gap(hi, hi)
        psi_ir = self.utility_gap(lo, lo)
        diagnostics = {
            "psi_top": psi_top,
            "psi_ir": psi_ir,
            "min_phi_ir": float(np.min(scan["phi_ir"])),
            "max_phi_top": float(np.max(scan["phi_top"])),
        }

        # all bank: the lowest financed type prefers the bank whatever pool the market prices,
        # and nobody leaves the bank for a market priced on the top type alone
        if diagnostics["min_phi_ir"] > 0 and psi_top >= 0 and self.selection_violations(hi) == 0:
            logger.info(f"All-bank regime: min Phi(theta_ir; .) = {diagnostics['min_phi_ir']:.3g}")
            return Equilibrium(cfg, ALL_BANK, lo, hi, menu.restricted(lo, hi), None, diagnostics)

        if diagnostics["max_phi_top"] < 0 and psi_ir < 0 and self.selection_violations(lo) == 0:
            logger.info("All-market regime: market preferred by every financed type")
            return Equilibrium(cfg, ALL_MARKET, lo, lo, None, self.market_contract(lo), diagnostics)

        a, b = lo, hi
        for _ in range(cfg.settings.max_bisection):
            if b - a <= cfg.settings.tolerance:
                break
            mid = 0.5 * (a + b)
            if self.gamma(mid) > 0:
                a = mid
            else:
                b = mid
        else:
            raise NoConvergence(f"cutoff fixed point not bracketed below {cfg.settings.tolerance} "
                                f"after {cfg.settings.max_bisection} steps")
        star = 0.5 * (a + b)
        diagnostics["indifference"] = abs(self.utility_gap(star, star))
        violations = self.selection_violations(star)
        diagnostics["selection_violations"] = violations
        if violations:
            logger.warning(f"No equilibrium with the bank below the market: the fixed point {star:.6g} "
                           f"leaves {violations} grid types on the wrong side")
            return Equilibrium(cfg, NO_MONOTONE, lo, star, None, None, diagnostics)
        logger.info(f"Coexistence: theta_ir={lo:.6g}, theta_star={star:.6g}")
        return Equilibrium(cfg, COEXISTENCE, lo, star, menu.restricted(lo, star),
                           self.market_contract(star), diagnostics)


def utility_gap(cfg: EquilibriumConfig, theta: float, vartheta: float) -> float:
    return EquilibriumSolver(cfg).utility_gap(theta, vartheta)


def inner_cutoff(cfg: EquilibriumConfig, vartheta: float) -> InnerCutoff:
    return EquilibriumSolver(cfg).inner_cutoff(vartheta)


def solve_equilibrium(cfg: EquilibriumConfig) -> Equilibrium:
    return EquilibriumSolver(cfg).solve()


def bank_share(eq: Equilibrium) -> float:
    """Share of financed types served by the bank; NaN when no monotone equilibrium exists."""
    if eq.regime == NO_FINANCE:
        return 0.0
    if eq.regime == NO_MONOTONE:
        return float("nan")
    dist = eq.config.dist
    financed = 1.0 - dist.cdf(eq.ir_cutoff)
    if financed <= 0:
        return 0.0
    return float((dist.cdf(eq.star_cutoff) - dist.cdf(eq.ir_cutoff)) / financed)


def spread_gap_at_cutoff(eq: Equilibrium) -> float:
    """d_b(theta_star) - d_m; NaN when the equilibrium has no market contract."""
    if eq.market_contract is None or not eq.market_contract.feasible:
        return float("nan")
    cfg = eq.config
    sol = solve_bank_contract(cfg.fam, eq.star_cutoff, cfg.lambda_b, cfg.a_bar, cfg.settings)
    if not sol.financed:
        return float("nan")
    return sol.contract.d - eq.market_contract.contract.d


def default_ranking(eq: Equilibrium, points: int = 20) -> pd.DataFrame:
    """Market versus hypothetical bank default probability for types in the market pool."""
    cfg = eq.config
    if eq.market_contract is None or not eq.market_contract.feasible:
        return pd.DataFrame(columns=["theta", "q_market", "q_bank", "difference"])
    thetas = np.linspace(eq.star_cutoff, cfg.theta_hi, points)
    d_m = eq.market_contract.contract.d
    q_market = 1.0 - np.asarray(cfg.fam.survivor(d_m, thetas))
    q_bank = np.array([solve_bank_contract(cfg.fam, float(t), cfg.lambda_b, cfg.a_bar, cfg.settings).default_prob
                       for t in thetas])
    return pd.DataFrame({"theta": thetas, "q_market": q_market, "q_bank": q_bank, "difference": q_market - q_bank})


@dataclass(frozen=True)
class CutoffResponse:
    param: str
    step: float
    base_star: float
    perturbed_star: float
    difference: float
    regime_changed: bool


def perturb_config(cfg: EquilibriumConfig, param: str, step: float, move: str = "lambda_m") -> EquilibriumConfig:
    """Raise the wedge (by lowering lambda_m or raising lambda_b) or the collateral cap by step."""
    if param == "a_bar":
        return replace(cfg, a_bar=cfg.a_bar + step)
    if param != "delta":
        raise ConfigError(f"cutoff comparative statics over '{param}' are not supported")
    if move == "lambda_m":
        return replace(cfg, lambda_m=cfg.lambda_m - step)
    if move == "lambda_b":
        return replace(cfg, lambda_b=cfg.lambda_b + step)
    raise ConfigError(f"the wedge moves through lambda_m or lambda_b, not '{move}'")


def cutoff_comparative_statics(cfg: EquilibriumConfig, param: str = "delta", step: float = 0.01,
                               move: str = "lambda_m") -> CutoffResponse:
    """theta_star(perturbed) - theta_star(base) for a wedge or collateral step."""
    base = solve_equilibrium(cfg)
    moved = solve_equilibrium(perturb_config(cfg, param, step, move))
    changed = base.regime != moved.regime
    if changed:
        logger.warning(f"Perturbing {param} by {step} moves the regime from {base.regime} to {moved.regime}")
    return CutoffResponse(param, step, base.star_cutoff, moved.star_cutoff,
                          moved.star_cutoff - base.star_cutoff, changed)
