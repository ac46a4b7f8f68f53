"""
Tests for src/utils/numerics.py — quadrature nodes, golden-section search, guarded bisection
"""
import numpy as np
import pytest

from src.utils.errors import NoConvergence
from src.utils.numerics import bisect_root, first_sign_change, gauss_legendre, golden_section_max, mapped_nodes


class TestGaussLegendre:
    """Cached nodes and their mapping onto [lo, hi]."""

    def test_weights_sum_to_two(self):
        """Weights on [-1, 1] integrate the constant 1 to 2."""
        _, w = gauss_legendre(16)
        assert w.sum() == pytest.approx(2.0)

    def test_cached_arrays_are_read_only(self):
        """Callers cannot corrupt the cached nodes."""
        x, _ = gauss_legendre(8)
        with pytest.raises(ValueError):
            x[0] = 0.0

    def test_mapped_nodes_integrate_cubic(self):
        """A 4-point rule is exact for x^3 on [1, 3]."""
        x, w = mapped_nodes(1.0, 3.0, 4)
        assert np.dot(w, x ** 3) == pytest.approx((3.0 ** 4 - 1.0) / 4.0, rel=1e-12)


class TestGoldenSection:
    """Unimodal maximisation."""

    def test_interior_peak(self):
        """-(x - 0.3)^2 peaks at 0.3."""
        x, lo, hi = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, tol=1e-10)
        assert x == pytest.approx(0.3, abs=1e-8)
        assert lo <= x <= hi

    def test_flat_right_tail_keeps_left_peak(self):
        """A plateau to the right of the peak does not pull the search away."""
        x, _, _ = golden_section_max(lambda t: -(t - 0.2) ** 2 if t < 0.2 else 0.0, 0.0, 1.0)
        assert x == pytest.approx(0.2, abs=1e-6)

    def test_degenerate_bracket(self):
        """A bracket narrower than tol returns its midpoint."""
        assert golden_section_max(lambda t: t, 1.0, 1.0 + 1e-12, tol=1e-10)[0] == pytest.approx(1.0)


class TestBisection:
    """scipy bisection wrapper."""

    def test_root(self):
        """x^2 - 2 has its root at sqrt(2)."""
        assert bisect_root(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(np.sqrt(2.0), abs=1e-11)

    def test_budget_exhausted(self):
        """Too few iterations surface as NoConvergence."""
        with pytest.raises(NoConvergence):
            bisect_root(lambda x: x - 0.123456789, 0.0, 1.0, xtol=1e-15, maxiter=3)

    def test_first_upward_sign_change(self):
        """Only a move from negative to non-negative counts."""
        assert first_sign_change([1.0, -1.0, -0.5, 0.0, 2.0]) == 2
        assert first_sign_change([1.0, 0.5, -1.0]) is None
