"""
Tests for src/part2/contracts.py — payoffs, slope identities, zero-profit locus
"""
from functools import partial

import numpy as np
import pytest

from src.part1.distributions import CashFlowFamily
from src.part2.contracts import (Contract, FinancierTech, PointLocus, accounting_identity_gap, borrower_utility,
                                 financier_profit, indifference_slope, locus_slope, private_surplus,
                                 slope_identities, social_surplus, zero_profit_collateral)
from src.utils.errors import DomainError, NoDefaultRisk, OverRepaid

BANK = FinancierTech(0.9)


def _utility_at(fam, theta, d, m):
    return borrower_utility(fam, theta, Contract(d, m))


def _profit_at(fam, theta, d, m):
    return financier_profit(fam, theta, Contract(d, m), BANK)


class TestPayoffs:
    """Borrower utility, financier profit and surplus for a single type."""

    def test_borrower_utility(self, free_exp_family):
        """U(2; d=1, m=0.5) = 2e^-0.5 - 0.5(1 - e^-0.5)."""
        u = borrower_utility(free_exp_family, 2.0, Contract(1.0, 0.5))
        assert u == pytest.approx(1.0163267, abs=1e-7)

    def test_financier_profit(self, free_exp_family):
        """Pi = d G + lambda m (1 - G) - 1 at lambda=0.9."""
        pi = financier_profit(free_exp_family, 2.0, Contract(1.0, 0.5), BANK)
        assert pi == pytest.approx(-0.2164082, abs=1e-7)

    def test_empty_contract_loses_the_investment(self, free_exp_family):
        """With d=0 and m=0 the financier recovers nothing."""
        assert financier_profit(free_exp_family, 2.0, Contract(0.0, 0.0), BANK) == pytest.approx(-1.0)

    def test_social_surplus(self, free_exp_family):
        """W = mu - 1 - (1 - lambda) m (1 - G)."""
        w = social_surplus(free_exp_family, 2.0, Contract(1.0, 0.5), BANK)
        assert w == pytest.approx(0.9803265, abs=1e-7)

    def test_private_surplus_short_by_default_cash(self, free_exp_family):
        """W - (U + Pi) is the cash E[X 1{X < d}] nobody collects in default."""
        c = Contract(1.3, 0.7)
        gap = social_surplus(free_exp_family, 2.0, c, BANK) - private_surplus(free_exp_family, 2.0, c, BANK)
        default_cash = (free_exp_family.mean(2.0) - free_exp_family.partial_expectation(1.3, 2.0)
                        - 1.3 * free_exp_family.survivor(1.3, 2.0))
        assert gap == pytest.approx(default_cash, abs=1e-12)
        assert gap == pytest.approx(2.0 - 3.3 * np.exp(-0.65), abs=1e-9)
        assert gap > 0

    @pytest.mark.parametrize("theta,d,m", [(1.5, 0.5, 0.0), (2.0, 1.0, 0.5), (2.5, 2.0, 1.0)])
    def test_accounting_identity(self, free_exp_family, theta, d, m):
        """U + Pi + 1 equals repaid cash net of the liquidation loss."""
        gap = accounting_identity_gap(free_exp_family, theta, Contract(d, m), BANK)
        assert abs(gap) < 1e-12

    def test_cash_recovery_raises_profit(self, free_exp_family):
        """A positive cash recovery share adds to the financier's revenue."""
        c = Contract(1.0, 0.5)
        plain = financier_profit(free_exp_family, 2.0, c, BANK)
        recovering = financier_profit(free_exp_family, 2.0, c, FinancierTech(0.9, cash_recovery=0.5))
        assert recovering > plain


class TestSlopeIdentities:
    """Exact partials against central finite differences."""

    H = 1e-6

    @pytest.mark.parametrize("theta", [1.5, 2.0, 2.5])
    @pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
    def test_partials_match_finite_differences(self, free_exp_family, theta, d, m):
        """dU/dd, dU/dm, dPi/dd and dPi/dm agree with central differences."""
        fam, h = free_exp_family, self.H
        s = slope_identities(fam, theta, Contract(d, m), BANK)

        def u(dd, mm):
            return borrower_utility(fam, theta, Contract(dd, mm))

        def pi(dd, mm):
            return financier_profit(fam, theta, Contract(dd, mm), BANK)

        assert s.dU_dd == pytest.approx((u(d + h, m) - u(d - h, m)) / (2 * h), rel=1e-6, abs=1e-8)
        assert s.dPi_dd == pytest.approx((pi(d + h, m) - pi(d - h, m)) / (2 * h), rel=1e-6, abs=1e-8)
        assert s.dU_dm == pytest.approx((u(d, m + h) - u(d, m)) / h, rel=1e-6, abs=1e-8)
        assert s.dPi_dm == pytest.approx((pi(d, m + h) - pi(d, m)) / h, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("kind,thetas", [("exponential", np.linspace(1.0, 3.0, 10)),
                                             ("lognormal", np.linspace(0.0, 1.0, 10))])
    def test_partials_on_dense_grid(self, kind, thetas):
        """10 types x 10 face values x 3 collateral levels, each partial within 1e-6 relative."""
        fam, h = CashFlowFamily(kind, sigma=0.5), self.H
        for theta in thetas:
            for d in np.linspace(0.2, 3.0, 10):
                for m in (0.0, 0.75, 1.5):
                    s = slope_identities(fam, theta, Contract(d, m), BANK)
                    u = partial(_utility_at, fam, theta)
                    pi = partial(_profit_at, fam, theta)
                    assert s.dU_dd == pytest.approx((u(d + h, m) - u(d - h, m)) / (2 * h), rel=1e-6, abs=1e-8)
                    assert s.dPi_dd == pytest.approx((pi(d + h, m) - pi(d - h, m)) / (2 * h), rel=1e-6, abs=1e-8)
                    assert s.dU_dm == pytest.approx((u(d, m + h) - u(d, m)) / h, rel=1e-6, abs=1e-8)
                    assert s.dPi_dm == pytest.approx((pi(d, m + h) - pi(d, m)) / h, rel=1e-6, abs=1e-8)

    def test_unsecured_utility_slope(self, free_exp_family):
        """With m=0, dU/dd = -G(d|theta)."""
        s = slope_identities(free_exp_family, 2.0, Contract(1.0, 0.0), BANK)
        assert s.dU_dd == pytest.approx(-0.6065307, abs=1e-7)

    def test_locus_slope_matches_collateral_derivative(self, free_exp_family):
        """dm/dd along Pi=0 is the derivative of the zero-profit collateral."""
        fam, theta, d, h = free_exp_family, 2.0, 1.0, 1e-6
        m = zero_profit_collateral(fam, theta, d, BANK)
        numeric = (zero_profit_collateral(fam, theta, d + h, BANK) -
                   zero_profit_collateral(fam, theta, d - h, BANK)) / (2 * h)
        assert locus_slope(fam, theta, Contract(d, m), BANK) == pytest.approx(numeric, rel=1e-6)

    def test_indifference_slope_is_negative(self, free_exp_family):
        """Trading face value for collateral: more d needs less m for equal utility."""
        assert indifference_slope(free_exp_family, 2.0, Contract(1.0, 0.5), BANK) < 0


class TestZeroProfitCollateral:
    """Closed-form collateral on the zero-profit locus."""

    def test_example_value(self, free_exp_family):
        """At theta=2, d=1, lambda=0.9 the collateral equals 1/0.9."""
        m = zero_profit_collateral(free_exp_family, 2.0, 1.0, BANK)
        assert m == pytest.approx(1.0 / 0.9, abs=1e-12)

    def test_collateral_breaks_even(self, free_exp_family):
        """Plugging the collateral back in gives zero profit."""
        m = zero_profit_collateral(free_exp_family, 2.0, 0.8, BANK)
        assert financier_profit(free_exp_family, 2.0, Contract(0.8, m), BANK) == pytest.approx(0.0, abs=1e-12)

    def test_no_default_risk(self, free_exp_family):
        """At d=0 default never happens, so collateral is never seized."""
        with pytest.raises(NoDefaultRisk):
            zero_profit_collateral(free_exp_family, 2.0, 0.0, BANK)

    def test_over_repaid(self, free_exp_family):
        """d G > 1 already over-repays: theta=3, d=2 gives 2e^(-2/3) > 1."""
        with pytest.raises(OverRepaid):
            zero_profit_collateral(free_exp_family, 3.0, 2.0, BANK)


class TestInputs:
    """Contract and financier validation."""

    def test_negative_collateral(self):
        """m < 0 is not a contract."""
        with pytest.raises(DomainError):
            Contract(1.0, -0.1)

    def test_nan_face_value(self):
        """A NaN face value is rejected."""
        with pytest.raises(DomainError):
            Contract(float("nan"), 0.0)

    def test_zero_lambda(self):
        """Liquidation efficiency must be positive."""
        with pytest.raises(DomainError):
            FinancierTech(0.0)

    def test_unknown_side(self):
        """Financiers are either bank or market."""
        with pytest.raises(DomainError):
            FinancierTech(0.9, side="fund")


class TestPointLocus:
    """Shared locus arithmetic for one known type."""

    def test_locus_utility_matches_substitution(self, free_exp_family):
        """Closed-form locus utility equals U(d, m(d))."""
        locus = PointLocus(free_exp_family, 2.0)
        d = 0.9
        m = locus.collateral(d, 0.9)
        assert locus.locus_utility(d, 0.9) == pytest.approx(locus.utility(d, m), abs=1e-12)

    def test_foc_changes_sign_at_interior_optimum(self, free_exp_family):
        """For the exponential family (1 - lambda) G = d g at d = (1 - lambda) theta."""
        locus = PointLocus(free_exp_family, 2.0)
        assert locus.foc_residual(0.19, 0.9) > 0
        assert locus.foc_residual(0.21, 0.9) < 0
        assert locus.foc_residual(0.2, 0.9) == pytest.approx(0.0, abs=1e-15)

    def test_bracket_is_ordered(self, free_exp_family):
        """d_lo sits just above zero and d_max far in the tail."""
        locus = PointLocus(free_exp_family, 2.0)
        assert 0 < locus.d_lo < 1e-6
        assert locus.d_max > 40.0

    def test_vectorised_collateral(self, free_exp_family):
        """collateral() accepts an array of face values."""
        locus = PointLocus(free_exp_family, 2.0)
        m = locus.collateral(np.array([0.5, 1.0]), 0.9)
        assert m[1] == pytest.approx(1.0 / 0.9)
