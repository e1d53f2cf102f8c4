import numpy as np
import pytest

from analytic_mi.dirichlet import sample_array
from analytic_mi.estimation import (
    DegenerateError,
    EstimationConfig,
    EstimationError,
    MomentSummary,
    StatisticMode,
    detect_degenerate,
    fixed_point_estimate,
    fixed_point_many,
    initial_alpha,
    summarize,
)
from analytic_mi.specfun import digamma

MLE = StatisticMode.MEAN_OF_LOGS
PAPER = StatisticMode.PAPER_LOG_OF_MEAN


def _summary(mean_p, mean_p2):
    mean_p = np.asarray(mean_p, dtype=float)
    return MomentSummary(mean_p=mean_p, mean_p2=np.asarray(mean_p2, dtype=float),
                         mean_log_p=np.zeros_like(mean_p), M=10)


@pytest.fixture(scope="module")
def draws_235():
    return sample_array([2.0, 3.0, 5.0], 100_000, seed=2024)


class TestConfig:
    def test_defaults(self):
        c = EstimationConfig()
        assert c.max_iterations == 1000
        assert c.convergence_tol == 1e-10
        assert c.statistic_mode is PAPER
        assert c.degenerate_epsilon == 1e-8

    @pytest.mark.parametrize("kw", [{"max_iterations": 0}, {"convergence_tol": -1.0},
                                    {"degenerate_epsilon": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EstimationConfig(**kw)

    def test_zero_tolerance_runs_fixed_budget(self, draws_235):
        r = fixed_point_estimate(draws_235[:2000], EstimationConfig(convergence_tol=0.0,
                                                                    max_iterations=25))
        assert r.iterations == 25

    @pytest.mark.parametrize("text,mode", [("paper", PAPER), ("log-of-mean", PAPER),
                                           ("mean-of-logs", MLE), ("mle", MLE)])
    def test_parse(self, text, mode):
        assert StatisticMode.parse(text) is mode


class TestSummarize:
    def test_two_samples(self):
        s = summarize(np.array([[0.2, 0.8], [0.4, 0.6]]))
        np.testing.assert_allclose(s.mean_p, [0.3, 0.7], rtol=1e-15)
        np.testing.assert_allclose(s.mean_p2, [0.10, 0.50], rtol=1e-14)
        assert s.M == 2

    def test_constant(self):
        s = summarize(np.full((5, 2), 0.5))
        np.testing.assert_allclose(s.mean_p2, [0.25, 0.25])
        np.testing.assert_allclose(s.mean_p2 - s.mean_p ** 2, 0.0, atol=1e-17)

    def test_law_of_large_numbers(self):
        s = summarize(sample_array([2.0, 3.0], 100_000, seed=8))
        np.testing.assert_allclose(s.mean_p, [0.4, 0.6], atol=0.01)

    def test_invariants(self, draws_235):
        s = summarize(draws_235)
        assert np.all(s.mean_p2 <= s.mean_p)
        assert abs(s.mean_p.sum() - 1.0) <= 1e-9

    def test_all_zero_class_sentinel(self):
        s = summarize(np.array([[0.0, 0.3, 0.7], [0.0, 0.6, 0.4]]))
        assert s.mean_log_p[0] == -np.inf

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            summarize(np.array([[0.5, 0.5]]))


class TestInitialAlpha:
    def test_formula(self):
        a = initial_alpha(_summary([0.5, 0.5], [0.3, 0.26])).alpha
        np.testing.assert_allclose(a, [2.0, 12.0], rtol=1e-12)

    def test_zero_variance_floored(self):
        a = initial_alpha(_summary([0.5, 0.5], [0.25, 0.25])).alpha
        np.testing.assert_array_equal(a, [1e-3, 1e-3])

    def test_degenerate_gets_zero(self):
        a = initial_alpha(_summary([1e-12, 0.5, 0.5], [1e-24, 0.3, 0.3])).alpha
        assert a[0] == 0.0 and np.all(a[1:] > 0.0)


class TestDegenerate:
    def test_flagged(self):
        s = _summary([1e-12, 0.5, 0.5 - 1e-12], [1e-24, 0.25, 0.25])
        assert detect_degenerate(s, 1e-8) == {0}

    def test_none(self):
        assert detect_degenerate(_summary([0.2, 0.3, 0.5], [0.05, 0.1, 0.3]), 1e-8) == set()

    def test_boundary_kept(self):
        s = _summary([1e-7, 0.5, 0.5 - 1e-7], [1e-14, 0.25, 0.25])
        assert detect_degenerate(s, 1e-8) == set()

    def test_both_conditions_required(self):
        # small mean but a second moment above eps^2 is not degenerate
        s = _summary([5e-9, 0.5, 0.5], [1e-15, 0.25, 0.25])
        assert detect_degenerate(s, 1e-8) == set()

    def test_all_degenerate(self):
        with pytest.raises(DegenerateError):
            detect_degenerate(_summary([1e-12, 1e-12], [1e-25, 1e-25]), 1e-8)


class TestFixedPoint:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_mean_of_logs_recovers(self, seed):
        s = sample_array([2.0, 3.0, 5.0], 100_000, seed=seed)
        r = fixed_point_estimate(s, EstimationConfig(statistic_mode=MLE))
        assert r.converged
        np.testing.assert_allclose(r.alpha, [2.0, 3.0, 5.0], rtol=0.05)

    def test_residual_at_convergence(self, draws_235):
        cfg = EstimationConfig(statistic_mode=MLE, refine_inverse_digamma=True)
        r = fixed_point_estimate(draws_235, cfg)
        assert r.converged
        summ = summarize(draws_235)
        resid = digamma(r.alpha) - digamma(r.alpha.sum()) - summ.mean_log_p
        assert np.max(np.abs(resid)) <= 10 * cfg.convergence_tol

    def test_unrefined_inverse_is_biased(self, draws_235):
        # the raw two-branch inverse moves the fixed point itself
        cfg = EstimationConfig(statistic_mode=MLE, refine_inverse_digamma=False)
        r = fixed_point_estimate(draws_235, cfg)
        rel = r.alpha / np.array([2.0, 3.0, 5.0]) - 1.0
        assert np.all(rel > 0.03)

    def test_log_of_mean_direction(self, draws_235):
        r = fixed_point_estimate(draws_235, EstimationConfig(statistic_mode=PAPER))
        np.testing.assert_allclose(r.alpha / r.alpha.sum(), [0.2, 0.3, 0.5], atol=0.01)

    def test_log_of_mean_drifts(self, draws_235):
        # With s_k = log E p_k the sweep maps S to about exp(Psi(S)) + C/2,
        # i.e. S + (C - 1)/2 for large S, so there is no finite fixed point:
        # the total grows linearly with the iteration budget.
        totals = []
        for n in (100, 200, 400):
            r = fixed_point_estimate(draws_235, EstimationConfig(statistic_mode=PAPER,
                                                                 max_iterations=n))
            assert not r.converged
            totals.append(r.alpha.sum())
        steps = np.diff(totals) / np.array([100, 200])
        np.testing.assert_allclose(steps, 1.0, rtol=0.05)

    def test_scale_sanity(self):
        base = np.array([1.0, 2.0, 5.0])
        s = sample_array(50.0 * base, 100_000, seed=9)
        r = fixed_point_estimate(s, EstimationConfig(statistic_mode=MLE))
        np.testing.assert_allclose(r.alpha / r.alpha.sum(), base / base.sum(), atol=0.02)

    def test_degenerate_class_pinned(self):
        s = sample_array([0.0, 2.0, 3.0], 5000, seed=10)
        for mode in (MLE, PAPER):
            r = fixed_point_estimate(s, EstimationConfig(statistic_mode=mode, max_iterations=50))
            assert r.alpha[0] == 0.0
            assert np.all(r.alpha[1:] > 0.0)
            assert r.degenerate == (0,)

    def test_single_live_class(self):
        s = np.zeros((10, 3))
        s[:, 1] = 1.0
        with pytest.raises(DegenerateError):
            fixed_point_estimate(s)

    def test_deterministic(self, draws_235):
        cfg = EstimationConfig(statistic_mode=MLE)
        a = fixed_point_estimate(draws_235[:5000], cfg).alpha
        b = fixed_point_estimate(draws_235[:5000], cfg).alpha
        assert a.tobytes() == b.tobytes()

    def test_batch_matches_single(self):
        stack = np.stack([sample_array([1.0, 4.0, 2.0], 50, seed=k) for k in range(6)])
        cfg = EstimationConfig(statistic_mode=MLE, max_iterations=300)
        alpha, iters, conv, ok = fixed_point_many(stack, cfg)
        assert ok.all()
        for k in range(6):
            r = fixed_point_estimate(stack[k], cfg)
            np.testing.assert_array_equal(alpha[k], r.alpha)
            assert iters[k] == r.iterations and conv[k] == r.converged

    def test_batch_flags_single_class_items(self):
        stack = np.stack([sample_array([1.0, 1.0], 20, seed=1), np.tile([0.0, 1.0], (20, 1))])
        alpha, _, _, ok = fixed_point_many(stack, EstimationConfig(statistic_mode=MLE))
        assert ok.tolist() == [True, False]
        assert np.all(np.isnan(alpha[1]))

    def test_non_finite_iterate_is_error(self, monkeypatch):
        import analytic_mi.estimation as est

        monkeypatch.setattr(est, "inv_digamma_minka", lambda y, refine=False: np.full_like(y, np.nan))
        with pytest.raises(EstimationError):
            fixed_point_estimate(sample_array([1.0, 2.0], 20, seed=0))

    def test_output_is_valid_params(self, draws_235):
        r = fixed_point_estimate(draws_235[:1000], EstimationConfig(statistic_mode=MLE))
        assert np.all(np.isfinite(r.alpha)) and np.all(r.alpha >= 0.0)
