from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from marketadaptive.errors import (
    DegenerateRiskError,
    InsufficientDataError,
    InvalidInputError,
    NumericalFailureError,
)
from marketadaptive.ratios import RatioConfig, compute_stats, sharpe
from marketadaptive.rrl import (
    PolicyParams,
    TrainConfig,
    episode,
    forward,
    gradient,
    init_params,
    policy_path,
    train,
)

from conftest import finite_difference, gradient_instance, max_relative_error, regime_market


class TestForward:
    def test_zero_params_equal_weights(self):
        w = forward(PolicyParams.zeros(3, 2), np.ones((3, 2)), np.array([0.2, 0.3, 0.5]))
        assert w == pytest.approx([1 / 3] * 3, abs=1e-15)

    def test_saturated_bias(self):
        p = PolicyParams(np.zeros((2, 1)), np.zeros(2), np.array([10.0, -10.0]))
        w = forward(p, np.zeros((2, 1)), np.array([0.5, 0.5]))
        assert w == pytest.approx([1, 0], abs=1e-8)

    @given(seed=st.integers(0, 10_000), shift=st.floats(-50, 50))
    def test_simplex_and_shift_invariance(self, seed, shift):
        rng = np.random.default_rng(seed)
        p = PolicyParams.random(3, 4, seed=seed, scale=3.0)
        x = rng.normal(0, 0.05, (3, 4))
        prev = rng.dirichlet(np.ones(3))
        w = forward(p, x, prev)
        assert np.all(w > 0) and w.sum() == pytest.approx(1, abs=1e-12)
        shifted = PolicyParams(p.feature_weights, p.recurrence_weights, p.bias + shift)
        w2 = forward(shifted, x, prev)
        assert np.argmax(w2) == np.argmax(w)
        assert np.max(np.abs(w2 - w)) < 1e-12

    def test_dimension_mismatch(self):
        p = PolicyParams.zeros(2, 3)
        with pytest.raises(InvalidInputError):
            forward(p, np.zeros((2, 2)), np.array([0.5, 0.5]))
        with pytest.raises(InvalidInputError):
            forward(p, np.zeros((2, 3)), np.array([1.0]))


class TestEpisode:
    def test_single_asset(self):
        r = np.array([[0.01], [0.02], [-0.01], [0.03], [0.0]])
        res = episode(PolicyParams.random(1, 2, seed=1), r, TrainConfig(feature_lags=2, cost_rate=0.01))
        assert np.all(res.weight_path == 1.0)
        assert res.portfolio_returns == pytest.approx(r[2:, 0], abs=1e-15)

    def test_equal_weights_give_row_means(self):
        r = np.array([[0.01, 0.03], [0.02, -0.02], [0.05, 0.01], [-0.01, 0.03]])
        res = episode(PolicyParams.zeros(2, 1), r, TrainConfig(feature_lags=1))
        assert res.portfolio_returns == pytest.approx([0.0, 0.03, 0.01], abs=1e-15)
        assert res.reward == pytest.approx(sharpe(0.04 / 3, 0.0, compute_stats([0.0, 0.03, 0.01]).std))

    def test_flat_regime_matches_sharpe(self):
        params, r, cfg = gradient_instance(4, "market_adaptive")
        pinned = replace(cfg, ratio_config=replace(cfg.ratio_config, fixed_regime_return=0.0))
        a = episode(params, r, pinned)
        b = episode(params, r, replace(cfg, reward_kind="sharpe"))
        assert a.rho == 1.0
        assert a.reward == b.reward

    def test_window_too_short(self):
        with pytest.raises(InsufficientDataError):
            episode(PolicyParams.zeros(2, 3), np.zeros((4, 2)), TrainConfig(feature_lags=3))

    def test_zero_variance(self):
        with pytest.raises(DegenerateRiskError):
            episode(PolicyParams.zeros(2, 1), np.full((6, 2), 0.01), TrainConfig(feature_lags=1))

    def test_cost_is_charged_on_turnover(self):
        rng = np.random.default_rng(0)
        r = rng.normal(0, 0.02, (20, 2))
        p = PolicyParams.random(2, 2, seed=0, scale=20.0)
        free = episode(p, r, TrainConfig(feature_lags=2))
        costly = episode(p, r, TrainConfig(feature_lags=2, cost_rate=0.01))
        turnover = np.abs(np.diff(free.weight_path, axis=0)).sum(axis=1)
        assert costly.portfolio_returns == pytest.approx(free.portfolio_returns - 0.01 * turnover, abs=1e-15)

    @pytest.mark.parametrize("t", [5, 12, 20])
    def test_no_look_ahead(self, t):
        rng = np.random.default_rng(t)
        r = rng.normal(0, 0.02, (30, 2))
        cfg = TrainConfig(feature_lags=3)
        p = PolicyParams.random(2, 3, seed=2, scale=5.0)
        base = episode(p, r, cfg)
        scrambled = r.copy()
        scrambled[t + 1:] = rng.permutation(scrambled[t + 1:])
        other = episode(p, scrambled, cfg)
        # portfolio return index k is earned on return row k + lags
        k = t - cfg.feature_lags
        assert np.array_equal(base.portfolio_returns[:k + 1], other.portfolio_returns[:k + 1])

    def test_policy_path_matches_forward(self):
        rng = np.random.default_rng(9)
        r = rng.normal(0, 0.02, (12, 2))
        p = PolicyParams.random(2, 3, seed=9, scale=2.0)
        path = policy_path(p, r)
        prev = np.array([0.5, 0.5])
        for k in range(path.shape[0]):
            t = k + 2
            w = forward(p, r[t - 2:t + 1][::-1].T, prev)
            assert w == pytest.approx(path[k], abs=1e-14)
            prev = w


class TestGradient:
    @pytest.mark.parametrize("kind", ["sharpe", "market_adaptive"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, seed, kind):
        params, r, cfg = gradient_instance(seed, kind)
        g = gradient(params, r, cfg).to_vector()
        assert max_relative_error(g, finite_difference(params, r, cfg)) < 1e-4

    @pytest.mark.parametrize("kind", ["sharpe", "market_adaptive"])
    def test_with_transaction_costs(self, kind):
        params, r, cfg = gradient_instance(11, kind, cost_rate=0.002)
        g = gradient(params, r, cfg).to_vector()
        assert max_relative_error(g, finite_difference(params, r, cfg)) < 1e-4

    def test_saturated_bias_has_no_gradient(self):
        r = np.random.default_rng(0).normal(0, 0.02, (30, 2))
        p = PolicyParams(np.zeros((2, 2)), np.zeros(2), np.array([50.0, -50.0]))
        g = gradient(p, r, TrainConfig(feature_lags=2))
        assert np.abs(g.bias).max() < 1e-15

    def test_zero_variance_propagates(self):
        with pytest.raises(DegenerateRiskError):
            gradient(PolicyParams.zeros(2, 1), np.full((6, 2), 0.01), TrainConfig(feature_lags=1))


class TestTrain:
    def test_config_invariants(self):
        for bad in (dict(epochs=0), dict(learning_rate=0), dict(feature_lags=0), dict(cost_rate=-1)):
            with pytest.raises(InvalidInputError):
                TrainConfig(**bad)

    def test_best_so_far_bookkeeping(self):
        params, r, cfg = gradient_instance(3, "sharpe")
        cfg = replace(cfg, epochs=40, learning_rate=0.5)
        res = train(params, r, cfg)
        assert res.reward_trace.shape == (41,)
        assert res.best_reward == res.reward_trace.max() >= res.reward_trace[0]
        assert episode(res.params, r, cfg).reward == res.best_reward

    def test_learns_dominant_asset(self):
        # asset 0: same noise as asset 1 plus a positive daily edge
        rng = np.random.default_rng(5)
        noise = rng.normal(0, 0.01, (400, 1))
        r = np.hstack([noise + 0.002, noise + rng.normal(0, 0.002, (400, 1))])
        cfg = TrainConfig(feature_lags=5, epochs=200, learning_rate=0.5, seed=1)
        res = train(init_params(2, cfg), r, cfg)
        assert episode(res.params, r, cfg).weight_path[:, 0].mean() > 0.5

    def test_deterministic(self):
        r = to_matrix(regime_market(seed=3, n_segments=2))
        cfg = TrainConfig(epochs=30, feature_lags=5, reward_kind="market_adaptive", seed=4)
        a = train(init_params(2, cfg), r, cfg)
        b = train(init_params(2, cfg), r, cfg)
        assert np.array_equal(a.params.to_vector(), b.params.to_vector())
        assert np.array_equal(a.reward_trace, b.reward_trace)

    def test_pinned_regime_reproduces_sharpe_training(self):
        r = to_matrix(regime_market(seed=8, n_segments=2))
        sharpe_cfg = TrainConfig(epochs=50, feature_lags=5, seed=2)
        mar_cfg = replace(sharpe_cfg, reward_kind="market_adaptive",
                          ratio_config=RatioConfig(fixed_regime_return=0.0))
        a = train(init_params(2, sharpe_cfg), r, sharpe_cfg)
        b = train(init_params(2, mar_cfg), r, mar_cfg)
        assert np.array_equal(a.reward_trace, b.reward_trace)
        assert np.array_equal(a.params.to_vector(), b.params.to_vector())

    def test_non_finite_reports_epoch(self):
        with pytest.raises(NumericalFailureError, match="epoch 0"):
            train(PolicyParams.zeros(2, 1), np.full((6, 2), 0.01), TrainConfig(feature_lags=1, epochs=3))


def to_matrix(prices):
    return prices.prices[1:] / prices.prices[:-1] - 1.0
