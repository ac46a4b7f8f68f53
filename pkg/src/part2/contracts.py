"""Contract primitives: payoffs, zero-profit collateral, slopes, and the zero-profit locus.

A contract (d, m) promises face value d and pledges collateral m. The borrower
repays when X >= d; otherwise the financier seizes m and realises lambda * m.
"""
from dataclasses import dataclass

import numpy as np

from src.part1.distributions import CashFlowFamily
from src.utils.errors import DomainError, NoDefaultRisk, OverRepaid

SIDES = ("bank", "market")
NO_DEFAULT_TOL = 1e-12

# quantile levels that bound every search over the face value
D_LO_LEVEL = 1e-12
D_MAX_LEVEL = 1.0 - 1e-10


@dataclass(frozen=True)
class Contract:
    d: float
    m: float

    def __post_init__(self):
        if not (np.isfinite(self.d) and self.d >= 0):
            raise DomainError(f"face value must be finite and nonnegative, got {self.d}")
        if not (np.isfinite(self.m) and self.m >= 0):
            raise DomainError(f"collateral must be finite and nonnegative, got {self.m}")


@dataclass(frozen=True)
class FinancierTech:
    lambda_: float
    side: str = "bank"
    cash_recovery: float = 0.0

    def __post_init__(self):
        if not 0 < self.lambda_ <= 1:
            raise DomainError(f"liquidation efficiency must lie in (0, 1], got {self.lambda_}")
        if self.side not in SIDES:
            raise DomainError(f"unknown financier side '{self.side}'")
        if not 0 <= self.cash_recovery <= 1:
            raise DomainError(f"cash recovery must lie in [0, 1], got {self.cash_recovery}")


@dataclass(frozen=True)
class SlopeIdentities:
    dU_dd: float
    dU_dm: float
    dPi_dd: float
    dPi_dm: float


def _cash_below(fam, theta, d):
    """E[X 1{X < d} | theta]."""
    return fam.mean(theta) - fam.partial_expectation(d, theta) - d * fam.survivor(d, theta)


def borrower_utility(fam: CashFlowFamily, theta: float, c: Contract) -> float:
    surv = fam.survivor(c.d, theta)
    return float(fam.partial_expectation(c.d, theta) - c.m * (1.0 - surv))


def financier_profit(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    surv = fam.survivor(c.d, theta)
    revenue = c.d * surv + tech.lambda_ * c.m * (1.0 - surv)
    if tech.cash_recovery:
        revenue += tech.cash_recovery * _cash_below(fam, theta, c.d)
    return float(revenue - 1.0)


def social_surplus(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    surv = fam.survivor(c.d, theta)
    return float(fam.mean(theta) - (1.0 - tech.lambda_) * c.m * (1.0 - surv) - 1.0)


def private_surplus(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    """U + Pi; Pi is already net of the unit investment.

    Short of social_surplus by E[X 1{X < d}], the cash left unclaimed in default.
    """
    return borrower_utility(fam, theta, c) + financier_profit(fam, theta, c, tech)


def accounting_identity_gap(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    """(U + Pi + 1) - (E[X 1{X >= d}] - (1 - lambda) m (1 - G)); zero up to rounding without cash recovery."""
    surv = fam.survivor(c.d, theta)
    repaid_cash = fam.partial_expectation(c.d, theta) + c.d * surv
    lhs = borrower_utility(fam, theta, c) + financier_profit(fam, theta, c, tech) + 1.0
    rhs = repaid_cash - (1.0 - tech.lambda_) * c.m * (1.0 - surv)
    return float(lhs - rhs)


def zero_profit_collateral(fam: CashFlowFamily, theta: float, d: float, tech: FinancierTech) -> float:
    """Collateral m that makes the financier break even at face value d (may exceed the cap)."""
    surv = float(fam.survivor(d, theta))
    if surv >= 1.0 - NO_DEFAULT_TOL:
        raise NoDefaultRisk(f"G({d:.6g}|{theta:.6g}) = {surv!r}: collateral is never seized")
    repaid = d * surv
    if tech.cash_recovery:
        repaid += tech.cash_recovery * float(_cash_below(fam, theta, d))
    if repaid > 1.0:
        raise OverRepaid(f"d*G = {repaid:.6g} > 1 at d={d:.6g}, theta={theta:.6g}")
    return (1.0 - repaid) / (tech.lambda_ * (1.0 - surv))


def slope_identities(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> SlopeIdentities:
    """Exact partial derivatives of U and Pi in (d, m)."""
    surv = float(fam.survivor(c.d, theta))
    dens = float(fam.density(c.d, theta))
    dpi_dd = surv - c.d * dens + tech.lambda_ * c.m * dens
    if tech.cash_recovery:
        dpi_dd += tech.cash_recovery * c.d * dens
    return SlopeIdentities(
        dU_dd=-surv - c.m * dens,
        dU_dm=-(1.0 - surv),
        dPi_dd=dpi_dd,
        dPi_dm=tech.lambda_ * (1.0 - surv),
    )


def locus_slope(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    """dm/dd along Pi = 0."""
    s = slope_identities(fam, theta, c, tech)
    return -s.dPi_dd / s.dPi_dm


def indifference_slope(fam: CashFlowFamily, theta: float, c: Contract, tech: FinancierTech) -> float:
    """dm/dd along constant borrower utility."""
    s = slope_identities(fam, theta, c, tech)
    return -s.dU_dd / s.dU_dm


class ZeroProfitLocus:
    """Zero-profit locus seen by one financier: payoff moments as functions of d.

    Subclasses supply survival(d), density(d) and partial(d), plus the face-value
    bracket [d_lo, d_max]. Everything else (collateral, profit, utility along the
    locus, first-order residuals) is shared, so a bank solve and a point-mass
    market solve run the same arithmetic.
    """

    d_lo: float
    d_max: float

    def survival(self, d):
        raise NotImplementedError

    def density(self, d):
        raise NotImplementedError

    def partial(self, d):
        raise NotImplementedError

    def collateral(self, d, lambda_):
        """m(d) = (1 - d G) / (lambda (1 - G)), unclipped."""
        surv = self.survival(d)
        with np.errstate(divide="ignore"):
            return (1.0 - d * surv) / (lambda_ * (1.0 - surv))

    def profit(self, d, m, lambda_):
        surv = self.survival(d)
        return d * surv + lambda_ * m * (1.0 - surv) - 1.0

    def utility(self, d, m):
        return self.partial(d) - m * (1.0 - self.survival(d))

    def locus_utility(self, d, lambda_):
        """Borrower utility with m = m(d) substituted in closed form."""
        return self.partial(d) - (1.0 - d * self.survival(d)) / lambda_

    def foc_residual(self, d, lambda_):
        """(1 - lambda) G - d g: positive left of the locus maximum, negative right of it."""
        return (1.0 - lambda_) * self.survival(d) - d * self.density(d)

    def slope_equality_residual(self, d, lambda_):
        """(1 - lambda) G - g (d - lambda m(d))."""
        return (1.0 - lambda_) * self.survival(d) - self.density(d) * (d - lambda_ * self.collateral(d, lambda_))


class PointLocus(ZeroProfitLocus):
    """Locus of a single known type."""

    def __init__(self, fam: CashFlowFamily, theta: float):
        self.fam = fam
        self.theta = float(theta)
        self.d_lo = float(fam.quantile(D_LO_LEVEL, self.theta))
        self.d_max = float(fam.quantile(D_MAX_LEVEL, self.theta))

    def survival(self, d):
        return self.fam.survivor(d, self.theta)

    def density(self, d):
        return self.fam.density(d, self.theta)

    def partial(self, d):
        return self.fam.partial_expectation(d, self.theta)
