"""Type space, type distribution and conditional cash-flow families.

Cash flows X are drawn from F_X(.|theta). Higher theta shifts the law up in
the first-order stochastic sense, so every survivor G(d|theta) rises in theta.
All objects here are frozen and every function is pure.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy import special, stats

from src.utils.errors import DegeneratePoolError, DomainError
from src.utils.numerics import mapped_nodes

FAMILY_KINDS = ("exponential", "lognormal")
TYPE_KINDS = ("uniform", "truncated_beta")
MOMENTS = ("G", "g", "one_minus_G", "pe")

DEGENERATE_MASS = 1e-12


def _as_array(x):
    return np.asarray(x, dtype=float)


def _unwrap(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


@dataclass(frozen=True)
class TypeSpace:
    theta_lo: float
    theta_hi: float

    def __post_init__(self):
        if not (np.isfinite(self.theta_lo) and np.isfinite(self.theta_hi)):
            raise DomainError(f"type bounds must be finite, got [{self.theta_lo}, {self.theta_hi}]")
        if not self.theta_lo < self.theta_hi:
            raise DomainError(f"theta_lo must be below theta_hi, got [{self.theta_lo}, {self.theta_hi}]")

    @property
    def width(self) -> float:
        return self.theta_hi - self.theta_lo

    def contains(self, theta) -> bool:
        # one ulp of slack so grid endpoints built by arithmetic stay inside
        theta = _as_array(theta)
        slack = 1e-12 * max(1.0, abs(self.theta_hi))
        return bool(np.all((theta >= self.theta_lo - slack) & (theta <= self.theta_hi + slack)))

    def require(self, theta):
        if not self.contains(theta):
            raise DomainError(f"theta outside [{self.theta_lo}, {self.theta_hi}]: {theta}")

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.theta_lo, self.theta_hi, n)


@dataclass(frozen=True)
class TypeDistribution:
    """Law F of borrower types on the support.

    ``truncated_beta`` takes Beta(alpha, beta) on [trim, 1 - trim] and maps it
    affinely onto the support, which keeps the density strictly positive at
    both endpoints.
    """
    support: TypeSpace
    kind: str = "uniform"
    alpha: float = 2.0
    beta: float = 2.0
    trim: float = 0.01

    def __post_init__(self):
        if self.kind not in TYPE_KINDS:
            raise DomainError(f"unknown type distribution '{self.kind}', expected one of {TYPE_KINDS}")
        if self.kind == "truncated_beta":
            if self.alpha <= 0 or self.beta <= 0:
                raise DomainError("beta shape parameters must be positive")
            if not 0 < self.trim < 0.5:
                raise DomainError("trim must lie in (0, 0.5)")

    @cached_property
    def _beta_law(self):
        law = stats.beta(self.alpha, self.beta)
        lo, hi = law.cdf(self.trim), law.cdf(1.0 - self.trim)
        return law, lo, hi - lo

    def _unit(self, theta):
        u = (_as_array(theta) - self.support.theta_lo) / self.support.width
        return np.clip(u, 0.0, 1.0)

    def cdf(self, theta):
        u = self._unit(theta)
        if self.kind == "uniform":
            return _unwrap(u)
        law, base, norm = self._beta_law
        t = self.trim + u * (1.0 - 2.0 * self.trim)
        return _unwrap(np.clip((law.cdf(t) - base) / norm, 0.0, 1.0))

    def pdf(self, theta):
        theta = _as_array(theta)
        inside = (theta >= self.support.theta_lo) & (theta <= self.support.theta_hi)
        if self.kind == "uniform":
            return _unwrap(np.where(inside, 1.0 / self.support.width, 0.0))
        law, _, norm = self._beta_law
        t = self.trim + self._unit(theta) * (1.0 - 2.0 * self.trim)
        dens = law.pdf(t) * (1.0 - 2.0 * self.trim) / (self.support.width * norm)
        return _unwrap(np.where(inside, dens, 0.0))

    def mass(self, theta_a: float, theta_b: float) -> float:
        return float(self.cdf(theta_b) - self.cdf(theta_a))


@dataclass(frozen=True)
class CashFlowFamily:
    """Conditional cash-flow law X | theta.

    exponential: mean theta (theta > 0).
    lognormal:   log X ~ N(theta, sigma^2).
    """
    kind: str = "exponential"
    sigma: float = 0.5
    support: Optional[TypeSpace] = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown cash-flow family '{self.kind}', expected one of {FAMILY_KINDS}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be a positive real, got {self.sigma}")
        if self.kind == "exponential" and self.support is not None and self.support.theta_lo <= 0:
            raise DomainError("exponential family needs a strictly positive type support")

    def _check(self, d, theta):
        d, theta = _as_array(d), _as_array(theta)
        if np.any(d < 0) or np.any(np.isnan(d)):
            raise DomainError(f"face value must be nonnegative, got {d}")
        if self.support is not None:
            self.support.require(theta)
        if self.kind == "exponential" and np.any(theta <= 0):
            raise DomainError(f"exponential scale must be positive, got theta={theta}")
        return d, theta

    def survivor(self, d, theta):
        d, theta = self._check(d, theta)
        if self.kind == "exponential":
            return _unwrap(np.exp(-d / theta))
        with np.errstate(divide="ignore"):
            return _unwrap(special.ndtr((theta - np.log(d)) / self.sigma))

    def density(self, d, theta):
        d, theta = self._check(d, theta)
        if self.kind == "exponential":
            return _unwrap(np.exp(-d / theta) / theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(d) - theta) / self.sigma
            dens = np.exp(-0.5 * z * z) / (d * self.sigma * np.sqrt(2.0 * np.pi))
        return _unwrap(np.where(d > 0, dens, 0.0))

    def partial_expectation(self, d, theta):
        """E[(X - d) 1{X >= d} | theta]."""
        d, theta = self._check(d, theta)
        if self.kind == "exponential":
            return _unwrap(theta * np.exp(-d / theta))
        s = self.sigma
        with np.errstate(divide="ignore"):
            log_d = np.log(d)
            upper = np.exp(theta + 0.5 * s * s) * special.ndtr((theta + s * s - log_d) / s)
            below = np.where(d > 0, d * special.ndtr((theta - log_d) / s), 0.0)
        return _unwrap(np.maximum(upper - below, 0.0))

    def mean(self, theta):
        _, theta = self._check(0.0, theta)
        if self.kind == "exponential":
            return _unwrap(theta)
        return _unwrap(np.exp(theta + 0.5 * self.sigma ** 2))

    def quantile(self, p, theta):
        """Inverse of F_X(.|theta) at probability p in (0, 1)."""
        p = _as_array(p)
        if np.any((p <= 0) | (p >= 1)):
            raise DomainError(f"quantile level must lie in (0, 1), got {p}")
        _, theta = self._check(0.0, theta)
        if self.kind == "exponential":
            return _unwrap(-theta * np.log1p(-p))
        return _unwrap(np.exp(theta + self.sigma * special.ndtri(p)))

    def upper_tail_mean(self, d, theta):
        """mu_+(d, theta) = E[X | X >= d, theta]; equals d where the tail is empty."""
        surv = _as_array(self.survivor(d, theta))
        pe = _as_array(self.partial_expectation(d, theta))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(surv > 0, pe / surv + _as_array(d), _as_array(d))
        return _unwrap(out)


@dataclass(frozen=True)
class CollateralEndowment:
    a_bar: float

    def __post_init__(self):
        if not (np.isfinite(self.a_bar) and self.a_bar >= 0):
            raise DomainError(f"collateral cap must be finite and nonnegative, got {self.a_bar}")


def survivor(fam: CashFlowFamily, d, theta):
    return fam.survivor(d, theta)


def density(fam: CashFlowFamily, d, theta):
    return fam.density(d, theta)


def partial_expectation(fam: CashFlowFamily, d, theta):
    return fam.partial_expectation(d, theta)


def _moment_integrand(fam: CashFlowFamily, which: str):
    if which == "G":
        return fam.survivor
    if which == "g":
        return fam.density
    if which == "one_minus_G":
        return lambda d, theta: 1.0 - fam.survivor(d, theta)
    if which == "pe":
        return fam.partial_expectation
    raise DomainError(f"unknown pool moment '{which}', expected one of {MOMENTS}")


def pool_weights(dist: TypeDistribution, pool: Tuple[float, float], order: int = 64):
    """Quadrature nodes and F-weights normalised by the pool mass F(b) - F(a)."""
    theta_a, theta_b = pool
    mass = dist.mass(theta_a, theta_b)
    if mass < DEGENERATE_MASS:
        raise DegeneratePoolError(f"pool [{theta_a:.6g}, {theta_b:.6g}] has mass {mass:.3g}")
    nodes, weights = mapped_nodes(theta_a, theta_b, order)
    return nodes, weights * dist.pdf(nodes) / mass


def pool_moment(fam: CashFlowFamily, dist: TypeDistribution, pool: Tuple[float, float], d,
                which: str = "G", order: int = 64):
    """Average of h(d|theta) over the conjectured pool under F.

    A point-mass pool [theta0, theta0] returns h(d|theta0) itself.
    """
    theta_a, theta_b = pool
    dist.support.require([theta_a, theta_b])
    if theta_a > theta_b:
        raise DomainError(f"pool bounds reversed: [{theta_a}, {theta_b}]")
    h = _moment_integrand(fam, which)
    if theta_a == theta_b:
        return h(d, theta_a)
    nodes, w = pool_weights(dist, pool, order)
    values = _as_array(h(_as_array(d)[..., None], nodes))
    return _unwrap(values @ w)
