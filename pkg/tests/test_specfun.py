"""Special functions against mpmath at 50 digits, plus recurrence properties."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from analytic_mi.specfun import (
    EULER_GAMMA,
    DomainError,
    digamma,
    inv_digamma_minka,
    log_beta_multivariate,
    log_gamma,
    trigamma,
)

mpmath.mp.dps = 50

LOG_GRID = np.logspace(-6, 6, 241)


def _ref(fn, xs):
    return np.array([float(fn(mpmath.mpf(float(x)))) for x in xs])


class TestLogGamma:
    def test_anchor_values(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(2.0) == 0.0
        np.testing.assert_allclose(log_gamma(0.5), 0.5 * math.log(math.pi), rtol=1e-14)
        np.testing.assert_allclose(log_gamma(0.5), 0.5723649429247001, rtol=1e-14)

    def test_against_mpmath(self):
        ref = _ref(mpmath.loggamma, LOG_GRID)
        got = log_gamma(LOG_GRID)
        # relative 1e-12 away from the zeros of ln Gamma at 1 and 2
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-15)

    def test_recurrence(self):
        x = np.random.default_rng(1).uniform(1e-9, 100.0, 1000)
        np.testing.assert_allclose(log_gamma(x + 1.0) - log_gamma(x), np.log(x), atol=1e-11)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            log_gamma(bad)

    def test_array_shape_preserved(self):
        x = np.arange(1.0, 7.0).reshape(2, 3)
        assert log_gamma(x).shape == (2, 3)
        assert isinstance(log_gamma(3.0), float)


class TestDigamma:
    def test_anchor_values(self):
        np.testing.assert_allclose(digamma(1.0), -0.5772156649015329, atol=1e-15)
        np.testing.assert_allclose(digamma(1.0), -EULER_GAMMA, atol=1e-15)
        np.testing.assert_allclose(digamma(2.0), 1.0 - EULER_GAMMA, atol=1e-15)
        np.testing.assert_allclose(digamma(0.5), -EULER_GAMMA - 2.0 * math.log(2.0), atol=1e-14)
        np.testing.assert_allclose(digamma(0.5), -1.9635100260214235, atol=1e-14)

    def test_against_mpmath(self):
        ref = _ref(mpmath.digamma, LOG_GRID)
        got = digamma(LOG_GRID)
        # absolute 1e-12, except that near x = 1e-6 |Psi| ~ 1e6 and a double
        # cannot carry 1e-12 absolute; there the bound is a few ulps relative
        tol = np.maximum(1e-12, 4.0 * np.finfo(float).eps * np.abs(ref))
        assert np.all(np.abs(got - ref) <= tol)
        np.testing.assert_allclose(got, ref, rtol=1e-14, atol=1e-12)

    def test_recurrence_random(self):
        # (0, 100]: reflect the half-open uniform draw
        x = 100.0 - np.random.default_rng(2).uniform(0.0, 100.0, 1000)
        lhs = digamma(x + 1.0) - digamma(x) - 1.0 / x
        assert np.max(np.abs(lhs)) <= 1e-11

    @given(st.floats(min_value=1e-3, max_value=1e5))
    def test_recurrence_property(self, x):
        assert abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) <= 1e-11 * max(1.0, 1.0 / x)

    @given(st.floats(min_value=1e-4, max_value=1e4), st.floats(min_value=1e-4, max_value=1e4))
    def test_monotone(self, a, b):
        if a < b:
            assert digamma(a) <= digamma(b)

    @pytest.mark.parametrize("bad", [0.0, -2.5, np.inf, -np.inf, np.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            digamma(bad)

    def test_trigamma_against_mpmath(self):
        xs = np.logspace(-4, 4, 81)
        ref = np.array([float(mpmath.psi(1, mpmath.mpf(float(x)))) for x in xs])
        np.testing.assert_allclose(trigamma(xs), ref, rtol=1e-13)


class TestInverseDigamma:
    def test_upper_branch(self):
        assert inv_digamma_minka(0.0) == 1.5
        assert inv_digamma_minka(-2.22) == pytest.approx(math.exp(-2.22) + 0.5, abs=0)

    def test_lower_branch(self):
        np.testing.assert_allclose(inv_digamma_minka(-10.0), -1.0 / (-10.0 + EULER_GAMMA),
                                   rtol=1e-15)
        np.testing.assert_allclose(inv_digamma_minka(-10.0), 0.10612, atol=5e-5)
        just_below = np.nextafter(-2.22, -np.inf)
        assert inv_digamma_minka(just_below) == -1.0 / (just_below + EULER_GAMMA)

    def test_refined_round_trip_anchor(self):
        np.testing.assert_allclose(inv_digamma_minka(digamma(3.0), refine=True), 3.0, atol=1e-10)

    def test_refined_is_inverse(self):
        y = np.linspace(-30.0, 15.0, 901)
        x = inv_digamma_minka(y, refine=True)
        assert np.all(x > 0.0)
        assert np.max(np.abs(digamma(x) - y)) <= 1e-10

    @given(st.floats(min_value=-30.0, max_value=15.0))
    @settings(max_examples=200)
    def test_refined_is_inverse_property(self, y):
        assert abs(digamma(inv_digamma_minka(y, refine=True)) - y) <= 1e-10

    def test_unrefined_is_approximate(self):
        # the raw rule is only asymptotically exact: it overshoots, by less
        # than 30% relative, and the error shrinks as x grows
        x = np.array([0.5, 1.0, 3.0, 10.0, 100.0])
        err = inv_digamma_minka(digamma(x)) - x
        assert np.all(err > 0.0)
        assert np.all(err / x < 0.3)
        assert np.all(np.diff(err) < 0.0)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            inv_digamma_minka(np.nan)


class TestLogBeta:
    def test_anchor_values(self):
        assert log_beta_multivariate([1.0, 1.0]) == 0.0
        np.testing.assert_allclose(log_beta_multivariate([1.0, 1.0, 1.0]), -math.log(2.0),
                                   rtol=1e-14)
        np.testing.assert_allclose(log_beta_multivariate([2.0, 3.0]), math.log(1.0 / 12.0),
                                   rtol=1e-14)

    def test_ratio_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = rng.uniform(0.01, 50.0, rng.integers(2, 11))
            lb = log_beta_multivariate(a)
            for i in range(a.size):
                up = a.copy()
                up[i] += 1.0
                ratio = math.exp(log_beta_multivariate(up) - lb)
                np.testing.assert_allclose(ratio, a[i] / a.sum(), rtol=1e-10)

    def test_rowwise(self):
        a = np.array([[1.0, 1.0], [2.0, 3.0]])
        np.testing.assert_allclose(log_beta_multivariate(a), [0.0, math.log(1.0 / 12.0)],
                                   atol=1e-14)

    def test_large_arguments_stay_finite(self):
        # raw Gamma products would overflow here
        assert np.isfinite(log_beta_multivariate([500.0, 700.0, 900.0]))

    @pytest.mark.parametrize("bad", [[0.0, 1.0], [-1.0, 2.0], [1.0]])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            log_beta_multivariate(bad)
