"""
Tests for src/part1/distributions.py — cash-flow families, type laws, pool moments
"""
import numpy as np
import pytest
from scipy import integrate

from src.part1.distributions import (CashFlowFamily, CollateralEndowment, TypeDistribution, TypeSpace,
                                     partial_expectation, pool_moment, pool_weights, survivor)
from src.utils.errors import DegeneratePoolError, DomainError


class TestTypeSpace:
    """Support checks for the borrower type interval."""

    def test_rejects_reversed_bounds(self):
        """theta_lo must sit strictly below theta_hi."""
        with pytest.raises(DomainError):
            TypeSpace(3.0, 1.0)

    def test_rejects_infinite_bounds(self):
        """An unbounded support is refused."""
        with pytest.raises(DomainError):
            TypeSpace(1.0, np.inf)

    def test_require_flags_out_of_support_type(self, support):
        """A type outside [1, 3] raises DomainError."""
        with pytest.raises(DomainError):
            support.require(3.5)

    def test_grid_hits_both_endpoints(self, support):
        """The uniform grid starts at theta_lo and ends at theta_hi."""
        grid = support.grid(5)
        assert grid[0] == 1.0
        assert grid[-1] == 3.0


class TestCashFlowFamily:
    """Closed-form survivor, density and partial expectation."""

    def test_exponential_survivor(self, free_exp_family):
        """G(1|2) = exp(-1/2)."""
        assert free_exp_family.survivor(1.0, 2.0) == pytest.approx(0.6065307, abs=1e-7)

    def test_exponential_density(self, free_exp_family):
        """g(1|2) = exp(-1/2) / 2."""
        assert free_exp_family.density(1.0, 2.0) == pytest.approx(0.3032653, abs=1e-7)

    def test_exponential_partial_expectation(self, free_exp_family):
        """E[(X - 1)+ | theta=2] = 2 exp(-1/2)."""
        assert free_exp_family.partial_expectation(1.0, 2.0) == pytest.approx(1.2130613, abs=1e-7)

    def test_partial_expectation_at_zero_is_mean(self, free_exp_family):
        """With d=0 the whole cash flow is upside: E[X | theta] = theta."""
        assert free_exp_family.partial_expectation(0.0, 2.0) == pytest.approx(2.0, abs=1e-12)

    def test_module_level_wrappers_match_methods(self, free_exp_family):
        """survivor() and partial_expectation() delegate to the family."""
        assert survivor(free_exp_family, 1.0, 2.0) == free_exp_family.survivor(1.0, 2.0)
        assert partial_expectation(free_exp_family, 1.0, 2.0) == free_exp_family.partial_expectation(1.0, 2.0)

    def test_lognormal_survivor_vanishes_far_out(self):
        """Lognormal tail mass at d=1e6 with theta=0, sigma=0.5 is below 1e-12."""
        fam = CashFlowFamily("lognormal", sigma=0.5)
        assert fam.survivor(1e6, 0.0) < 1e-12

    def test_lognormal_partial_expectation_matches_quadrature(self):
        """The closed form agrees with direct integration of (x - d) g(x)."""
        fam = CashFlowFamily("lognormal", sigma=0.5)
        d, theta = 1.5, 0.3
        numeric, _ = integrate.quad(lambda x: (x - d) * fam.density(x, theta), d, np.inf)
        assert fam.partial_expectation(d, theta) == pytest.approx(numeric, rel=1e-7)

    def test_lognormal_partial_expectation_at_zero_is_mean(self):
        """pe(0|theta) = exp(theta + sigma^2 / 2)."""
        fam = CashFlowFamily("lognormal", sigma=0.5)
        assert fam.partial_expectation(0.0, 0.3) == pytest.approx(np.exp(0.3 + 0.125), rel=1e-12)

    def test_survivor_decreasing_in_face_value(self, free_exp_family):
        """Raising d never raises the survival probability."""
        values = free_exp_family.survivor(np.linspace(0.0, 10.0, 50), 2.0)
        assert np.all(np.diff(values) <= 0)

    def test_survivor_increasing_in_type(self, exp_family):
        """Higher types first-order dominate lower ones."""
        values = exp_family.survivor(1.0, np.linspace(1.0, 3.0, 50))
        assert np.all(np.diff(values) > 0)

    def test_negative_face_value_rejected(self, free_exp_family):
        """d < 0 is outside the domain."""
        with pytest.raises(DomainError):
            free_exp_family.survivor(-0.1, 2.0)

    def test_support_is_enforced(self, exp_family):
        """A family tied to [1, 3] refuses theta=5."""
        with pytest.raises(DomainError):
            exp_family.survivor(1.0, 5.0)

    def test_exponential_needs_positive_support(self):
        """Exponential scale must be strictly positive on the whole support."""
        with pytest.raises(DomainError):
            CashFlowFamily("exponential", support=TypeSpace(0.0, 1.0))

    def test_unknown_family(self):
        """Only exponential and lognormal are known."""
        with pytest.raises(DomainError):
            CashFlowFamily("pareto")

    def test_quantile_inverts_survivor(self, free_exp_family):
        """G(F^-1(p)) = 1 - p."""
        d = free_exp_family.quantile(0.3, 2.0)
        assert free_exp_family.survivor(d, 2.0) == pytest.approx(0.7, abs=1e-12)

    def test_upper_tail_mean_exponential(self, free_exp_family):
        """Memorylessness: E[X | X >= d] = d + theta."""
        assert free_exp_family.upper_tail_mean(1.0, 2.0) == pytest.approx(3.0, abs=1e-12)


class TestTypeDistribution:
    """Uniform and truncated-beta type laws."""

    def test_uniform_cdf_and_pdf(self, uniform_types):
        """Uniform on [1, 3]: F(2) = 0.5 and f = 0.5 inside, 0 outside."""
        assert uniform_types.cdf(2.0) == pytest.approx(0.5)
        assert uniform_types.pdf(2.0) == pytest.approx(0.5)
        assert uniform_types.pdf(4.0) == 0.0

    def test_truncated_beta_integrates_to_one(self, support):
        """The affine-mapped, trimmed beta density has unit mass on the support."""
        dist = TypeDistribution(support, "truncated_beta", 2.0, 3.0, 0.01)
        total, _ = integrate.quad(dist.pdf, 1.0, 3.0)
        assert total == pytest.approx(1.0, abs=1e-8)
        assert dist.cdf(3.0) == pytest.approx(1.0, abs=1e-12)

    def test_truncated_beta_positive_at_endpoints(self, support):
        """Trimming keeps the density away from zero at theta_lo and theta_hi."""
        dist = TypeDistribution(support, "truncated_beta", 2.0, 2.0, 0.01)
        assert dist.pdf(1.0) > 0
        assert dist.pdf(3.0) > 0

    def test_bad_trim_rejected(self, support):
        """trim must lie in (0, 0.5)."""
        with pytest.raises(DomainError):
            TypeDistribution(support, "truncated_beta", trim=0.6)

    def test_mass_of_subinterval(self, uniform_types):
        """F(2.5) - F(1.5) = 0.5 under the uniform law."""
        assert uniform_types.mass(1.5, 2.5) == pytest.approx(0.5)


class TestPoolMoments:
    """Pool averages of payoff moments under F."""

    def test_survival_moments_sum_to_one(self, exp_family, uniform_types):
        """Pooled G and pooled 1 - G add up to one."""
        pool = (1.5, 3.0)
        total = pool_moment(exp_family, uniform_types, pool, 1.0, "G") + \
            pool_moment(exp_family, uniform_types, pool, 1.0, "one_minus_G")
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_point_mass_pool_is_exact(self, exp_family, uniform_types):
        """A pool [theta0, theta0] returns the moment of theta0 itself."""
        assert pool_moment(exp_family, uniform_types, (2.0, 2.0), 1.0, "pe") == \
            exp_family.partial_expectation(1.0, 2.0)

    def test_pooled_survivor_matches_quad(self, exp_family, uniform_types):
        """Gauss-Legendre pool average agrees with scipy quad."""
        numeric, _ = integrate.quad(lambda t: np.exp(-1.0 / t), 1.5, 3.0)
        expected = numeric / 1.5
        assert pool_moment(exp_family, uniform_types, (1.5, 3.0), 1.0, "G") == pytest.approx(expected, abs=1e-12)

    def test_vectorised_over_face_values(self, exp_family, uniform_types):
        """An array of face values gives one pooled value per entry."""
        ds = np.array([0.5, 1.0, 2.0])
        values = pool_moment(exp_family, uniform_types, (1.0, 3.0), ds, "G")
        assert values.shape == (3,)
        assert np.all(np.diff(values) < 0)

    def test_unknown_moment(self, exp_family, uniform_types):
        """Only G, g, one_minus_G and pe are defined."""
        with pytest.raises(DomainError):
            pool_moment(exp_family, uniform_types, (1.0, 3.0), 1.0, "variance")

    def test_reversed_pool(self, exp_family, uniform_types):
        """A pool with theta_a > theta_b is an input error."""
        with pytest.raises(DomainError):
            pool_moment(exp_family, uniform_types, (2.5, 1.5), 1.0, "G")

    def test_weights_sum_to_one(self, uniform_types):
        """Normalised pool weights are a probability measure."""
        _, w = pool_weights(uniform_types, (1.2, 2.7))
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_pool_weights(self, uniform_types):
        """Weights on a pool with no mass raise DegeneratePoolError."""
        with pytest.raises(DegeneratePoolError):
            pool_weights(uniform_types, (2.0, 2.0))


class TestCollateralEndowment:
    """The common collateral cap."""

    def test_negative_cap_rejected(self):
        """a_bar < 0 is not an endowment."""
        with pytest.raises(DomainError):
            CollateralEndowment(-1.0)
