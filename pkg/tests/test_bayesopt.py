import numpy as np
import pytest
from scipy import stats

from mpsir.bayesopt import (
    GaussianProcess,
    ParamSpace,
    bayes_opt_phase,
    expected_improvement,
    median_length_scale,
)


def quad(params):
    return -(params["x"] - 0.3) ** 2


class TestParamSpace:
    def test_degenerate(self):
        with pytest.raises(ValueError):
            ParamSpace((("x", 1.0, 1.0),))
        with pytest.raises(ValueError):
            ParamSpace(())

    def test_mapping(self):
        space = ParamSpace((("x", -2.0, 2.0), ("y", 0.0, 10.0)))
        np.testing.assert_allclose(space.from_unit(np.array([0.5, 0.1])), [0.0, 1.0])
        np.testing.assert_array_equal(space.from_unit(np.array([1.5, -0.1])), [2.0, 0.0])


class TestGaussianProcess:
    def test_interpolates_training_points(self):
        rng = np.random.default_rng(0)
        X = rng.random((12, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
        gp = GaussianProcess(median_length_scale(X)).fit(X, y)
        mu, sigma = gp.predict(X)
        np.testing.assert_allclose(mu, y, atol=1e-3)
        assert np.all(sigma < 1e-2)

    def test_uncertainty_grows_away_from_data(self):
        X = np.array([[0.0], [0.1]])
        gp = GaussianProcess(0.1).fit(X, np.array([1.0, 2.0]))
        _, near = gp.predict(np.array([[0.05]]))
        _, far = gp.predict(np.array([[0.9]]))
        assert far[0] > near[0]

    def test_duplicate_points(self):
        X = np.array([[0.2], [0.2], [0.7]])
        gp = GaussianProcess(0.5).fit(X, np.array([1.0, 1.0, 0.0]))
        mu, _ = gp.predict(X)
        assert np.all(np.isfinite(mu))

    def test_median_length_scale(self):
        X = np.array([[0.0], [1.0], [3.0]])
        # pairwise distances 1, 3, 2
        assert median_length_scale(X) == 2.0
        assert median_length_scale(X[:1]) == 1.0


class TestExpectedImprovement:
    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(1)
        for mu, sigma, best in [(0.2, 0.5, 0.3), (1.0, 0.1, 0.5), (-1.0, 2.0, 0.0)]:
            draws = rng.normal(mu, sigma, 400_000)
            mc = np.maximum(draws - best, 0).mean()
            ei = expected_improvement(np.array([mu]), np.array([sigma]), best)[0]
            assert ei == pytest.approx(mc, abs=4 * draws.std() / np.sqrt(len(draws)) + 1e-4)

    def test_closed_form(self):
        z = (0.7 - 0.5) / 0.2
        expected = 0.2 * stats.norm.cdf(z) + 0.2 * stats.norm.pdf(z)
        assert expected_improvement(np.array([0.7]), np.array([0.2]), 0.5)[0] == pytest.approx(expected)

    def test_zero_sigma(self):
        ei = expected_improvement(np.array([1.0, 0.2]), np.array([0.0, 0.0]), 0.5)
        np.testing.assert_array_equal(ei, [0.5, 0.0])

    def test_non_negative(self):
        rng = np.random.default_rng(2)
        ei = expected_improvement(rng.normal(size=1000), rng.uniform(0, 2, 1000), 0.5)
        assert np.all(ei >= 0)


class TestPhase:
    def test_finds_concave_optimum(self):
        params, trials = bayes_opt_phase(quad, ParamSpace.unit(["x"]), 50, 10, rng=0)
        assert abs(params["x"] - 0.3) < 0.05
        assert len(trials) == 50

    @pytest.mark.parametrize("seed", range(5))
    def test_finds_concave_optimum_across_seeds(self, seed):
        params, _ = bayes_opt_phase(quad, ParamSpace.unit(["x"]), 50, 10, rng=seed)
        assert abs(params["x"] - 0.3) < 0.05

    def test_pure_random_budget(self):
        params, trials = bayes_opt_phase(quad, ParamSpace.unit(["x"]), 10, 10, rng=3)
        assert all(t.acquisition is None for t in trials)
        best = max(trials, key=lambda t: t.objective)
        assert params == best.params

    def test_same_seed_same_trials(self):
        space = ParamSpace.unit(["a", "b"])

        def f(p):
            return -(p["a"] - 0.6) ** 2 - (p["b"] - 0.2) ** 2

        _, t1 = bayes_opt_phase(f, space, 20, 5, rng=9)
        _, t2 = bayes_opt_phase(f, space, 20, 5, rng=9)
        _, t3 = bayes_opt_phase(f, space, 20, 5, rng=10)
        assert t1 == t2
        assert t1 != t3

    def test_proposals_inside_box_and_ei_non_negative(self):
        space = ParamSpace((("x", -1.0, 3.0), ("y", 10.0, 11.0)))

        def f(p):
            return -abs(p["x"] - 2.9) - abs(p["y"] - 10.0)

        _, trials = bayes_opt_phase(f, space, 30, 5, rng=4)
        for t in trials:
            assert -1.0 <= t.params["x"] <= 3.0 and 10.0 <= t.params["y"] <= 11.0
            assert t.acquisition is None or t.acquisition >= 0.0

    def test_failures_recorded(self):
        def flaky(p):
            if p["x"] > 0.5:
                raise RuntimeError("boom")
            return p["x"]

        params, trials = bayes_opt_phase(flaky, ParamSpace.unit(["x"]), 15, 5, rng=0)
        failed = [t for t in trials if t.failed]
        assert failed and all(t.objective == 0.0 for t in failed)
        assert params["x"] <= 0.5

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            bayes_opt_phase(quad, ParamSpace.unit(["x"]), 5, 10)
        with pytest.raises(ValueError):
            bayes_opt_phase(quad, ParamSpace.unit(["x"]), 5, 0)
