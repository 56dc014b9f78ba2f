import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lqtbench.bayesopt import (
    PENALTY_FITNESS,
    AcquisitionConfig,
    GpState,
    SearchDomain,
    bounds_datadriven,
    bounds_observer,
    fitness,
    gp_posterior,
    optimize,
    propose_next,
    save_history_csv,
    se_kernel,
    ucb,
)

unit_floats = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


class TestSearchDomain:
    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            SearchDomain(lower=np.array([0.0]), upper=np.array([1.0]))
        with pytest.raises(ValueError):
            SearchDomain(lower=np.array([1.0]), upper=np.array([0.5]))

    def test_presets(self):
        obs = bounds_observer()
        assert obs.dim == 12
        assert np.allclose(obs.lower, [0.01] * 12)
        assert np.allclose(obs.upper, [1.0] * 5 + [0.4] * 7)
        dd = bounds_datadriven()
        assert np.allclose(dd.lower, [0.1] * 12)

    def test_latin_hypercube_deterministic_and_in_bounds(self):
        dom = bounds_observer()
        a = dom.latin_hypercube(7, 64)
        b = dom.latin_hypercube(7, 64)
        assert np.array_equal(a, b)
        assert all(dom.contains(x) for x in a)


class TestSeKernel:
    def test_unit_at_zero_distance(self):
        assert se_kernel([1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_analytic_value(self):
        assert se_kernel([0.0], [1.0]) == pytest.approx(np.exp(-1.0), rel=1e-12)

    @given(a=arrays(float, 3, elements=unit_floats),
           b=arrays(float, 3, elements=unit_floats))
    def test_symmetric_and_bounded(self, a, b):
        k = se_kernel(a, b)
        assert k == se_kernel(b, a)
        assert 0.0 < k <= 1.0


class TestPosterior:
    @pytest.fixture
    def state(self):
        X = np.array([[0.2, 0.2], [0.5, 0.9], [0.8, 0.3]])
        return GpState(X=X, F=np.array([1.0, 2.0, 3.0]))

    def test_gram_diagonal_ones(self, state):
        assert np.allclose(np.diag(state.gram), 1.0)

    def test_interpolation(self, state):
        for x, f in zip(state.X, state.F):
            mu, var = gp_posterior(state, x)
            assert abs(mu - f) <= 1e-6
            assert var <= 1e-6

    def test_far_field_reverts_to_prior(self, state):
        mu, var = gp_posterior(state, np.array([40.0, 40.0]))
        assert abs(mu) <= 1e-6
        assert var == pytest.approx(1.0, abs=1e-9)

    def test_variance_never_exceeds_prior(self, state):
        rng = np.random.default_rng(0)
        for x in rng.uniform(-1, 2, size=(50, 2)):
            _, var = gp_posterior(state, x)
            assert var <= 1.0 + 1e-9

    def test_single_point_matches_hand_formula(self):
        state = GpState(X=np.array([[0.0]]), F=np.array([5.0]))
        x = np.array([0.5])
        k = np.exp(-0.25)
        g = 1.0 + state.jitter
        mu, var = gp_posterior(state, x)
        assert mu == pytest.approx(k * 5.0 / g, rel=1e-9)
        assert var == pytest.approx(1.0 - k * k / g, rel=1e-9)


class TestAcquisition:
    def test_ucb_formula(self):
        state = GpState(X=np.array([[0.0]]), F=np.array([1.0]))
        x = np.array([0.3])
        mu, var = gp_posterior(state, x)
        assert ucb(state, x, 2.0) == pytest.approx(mu - 2.0 * var)

    def test_large_epsilon_prefers_unexplored(self):
        dom = SearchDomain(lower=np.array([0.01]), upper=np.array([10.0]))
        state = GpState(X=np.array([[0.05], [0.1]]), F=np.array([0.0, 0.1]))
        cfg = AcquisitionConfig(epsilon=100.0, candidate_count=512, seed=1)
        proposal = propose_next(state, cfg, dom)
        # far from the sampled cluster, where posterior variance is ~1
        assert np.min(np.abs(proposal - state.X)) > 0.5

    def test_epsilon_zero_tracks_posterior_mean(self):
        dom = SearchDomain(lower=np.array([0.01]), upper=np.array([2.0]))
        state = GpState(X=np.array([[0.5], [1.5]]), F=np.array([-1.0, 1.0]))
        cfg = AcquisitionConfig(epsilon=0.0, candidate_count=2048, seed=1)
        proposal = propose_next(state, cfg, dom)
        mu_prop, _ = gp_posterior(state, proposal)
        # with epsilon = 0 the proposal minimises the posterior mean itself
        pool = dom.latin_hypercube(1, 2048)
        means, _ = gp_posterior(state, pool)
        assert mu_prop <= means.min() + 1e-12


class TestFitness:
    class _Trace:
        def __init__(self, y, r, u):
            self.y, self.r, self.u = y, r, u

    def test_perfect_tracking_zero(self):
        tr = self._Trace(np.zeros((10, 2)), np.zeros((10, 2)), np.zeros((10, 1)))
        assert fitness(lambda th: tr, np.ones(3), 10) == 0.0

    def test_unit_error_undiscounted(self):
        tr = self._Trace(np.ones((10, 1)), np.zeros((10, 1)), np.zeros((10, 1)))
        assert fitness(lambda th: tr, np.ones(3), 10, gamma=1.0) == pytest.approx(10.0)

    def test_divergence_maps_to_penalty(self):
        def boom(theta):
            raise RuntimeError("closed loop diverged")

        assert fitness(boom, np.ones(3), 10) == PENALTY_FITNESS

    def test_nonfinite_trace_maps_to_penalty(self):
        tr = self._Trace(np.full((5, 1), np.inf), np.zeros((5, 1)), np.zeros((5, 1)))
        assert fitness(lambda th: tr, np.ones(3), 5) == PENALTY_FITNESS


class TestOptimize:
    def test_toy_quadratic_found(self):
        dom = SearchDomain(lower=np.array([0.01, 0.01]), upper=np.array([1.0, 1.0]))
        target = np.array([0.3, 0.7])
        cfg = AcquisitionConfig(epsilon=2.0, iterations=40, init_samples=10,
                                seed=3, candidate_count=512)
        res = optimize(lambda th: float(np.sum((th - target) ** 2)), dom, cfg)
        assert np.linalg.norm(res.theta_best - target) <= 0.1

    def test_history_length_and_determinism(self):
        dom = SearchDomain(lower=np.array([0.1]), upper=np.array([1.0]))
        cfg = AcquisitionConfig(iterations=5, init_samples=4, seed=8,
                                candidate_count=64)
        r1 = optimize(lambda th: 1.0, dom, cfg)
        r2 = optimize(lambda th: 1.0, dom, cfg)
        assert r1.history.shape == (9, 2)
        assert np.array_equal(r1.history, r2.history)
        assert np.array_equal(r1.theta_best, r2.theta_best)

    def test_best_no_worse_than_evaluations(self):
        dom = SearchDomain(lower=np.array([0.1, 0.1]), upper=np.array([1.0, 1.0]))
        cfg = AcquisitionConfig(iterations=10, init_samples=8, seed=2,
                                candidate_count=128)
        res = optimize(lambda th: float(th[0] + th[1]), dom, cfg)
        assert res.fitness_best <= res.history[:, -1].min() + 1e-9

    def test_penalties_recorded_not_raised(self):
        dom = SearchDomain(lower=np.array([0.1]), upper=np.array([1.0]))
        cfg = AcquisitionConfig(iterations=3, init_samples=3, seed=0,
                                candidate_count=32)

        def objective(theta):
            return PENALTY_FITNESS if theta[0] > 0.5 else float(theta[0])

        res = optimize(objective, dom, cfg)
        assert res.fitness_best < PENALTY_FITNESS

    def test_history_csv_schema(self, tmp_path):
        dom = SearchDomain(lower=np.full(12, 0.01), upper=np.full(12, 1.0))
        cfg = AcquisitionConfig(iterations=1, init_samples=2, seed=0,
                                candidate_count=16)
        res = optimize(lambda th: float(th.sum()), dom, cfg)
        path = tmp_path / "history.csv"
        save_history_csv(res, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == (["iter"] + [f"theta_{i+1}" for i in range(12)]
                          + ["fitness"])
