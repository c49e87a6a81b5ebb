"""Recurrent reinforcement-learning allocator.

The policy scores each asset from its own lagged returns and its previous
allocation, then maps scores to long-only weights with a softmax::

    score_i = W_i . x_i + u_i * w_prev_i + b_i
    w = softmax(score)

Training is full-batch gradient ascent on a window-level reward, either the
Sharpe Ratio or the Market-adaptive Ratio of the realized portfolio returns.
The gradient is exact: it is back-propagated by hand through the unrolled
recurrence. For the Market-adaptive reward, ``rho`` is fixed from the trailing
portfolio return at the end of the window and not differentiated.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
import math

import numpy as np
from numba import njit

from .errors import (
    DegenerateRiskError,
    InsufficientDataError,
    InvalidInputError,
    NumericalFailureError,
)
from .ratios import RatioConfig, market_adaptive_ratio, rho_for, sharpe


class RewardKind(str, Enum):
    SHARPE = "sharpe"
    MARKET_ADAPTIVE = "market_adaptive"


@dataclass(frozen=True, eq=False)
class PolicyParams:
    feature_weights: np.ndarray  # (n_assets, feature_lags)
    recurrence_weights: np.ndarray  # (n_assets,)
    bias: np.ndarray  # (n_assets,)

    def __post_init__(self):
        fw = np.array(self.feature_weights, dtype=float)
        rw = np.array(self.recurrence_weights, dtype=float)
        b = np.array(self.bias, dtype=float)
        if fw.ndim != 2 or rw.shape != (fw.shape[0],) or b.shape != (fw.shape[0],):
            raise InvalidInputError(
                f"inconsistent parameter shapes {fw.shape}, {rw.shape}, {b.shape}")
        if not (np.all(np.isfinite(fw)) and np.all(np.isfinite(rw)) and np.all(np.isfinite(b))):
            raise InvalidInputError("policy parameters must be finite")
        for name, arr in (("feature_weights", fw), ("recurrence_weights", rw), ("bias", b)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_assets(self):
        return self.feature_weights.shape[0]

    @property
    def feature_lags(self):
        return self.feature_weights.shape[1]

    @classmethod
    def zeros(cls, n_assets, feature_lags):
        return cls(np.zeros((n_assets, feature_lags)), np.zeros(n_assets), np.zeros(n_assets))

    @classmethod
    def random(cls, n_assets, feature_lags, seed=0, scale=0.1):
        """Uniform(-scale, scale) initialization from a seeded generator."""
        rng = np.random.default_rng(seed)
        return cls(
            rng.uniform(-scale, scale, (n_assets, feature_lags)),
            rng.uniform(-scale, scale, n_assets),
            rng.uniform(-scale, scale, n_assets),
        )

    def to_vector(self):
        return np.concatenate([self.feature_weights.ravel(), self.recurrence_weights, self.bias])

    @classmethod
    def from_vector(cls, vec, n_assets, feature_lags):
        vec = np.asarray(vec, dtype=float)
        k = n_assets * feature_lags
        if vec.shape != (k + 2 * n_assets,):
            raise InvalidInputError("parameter vector has the wrong length")
        return cls(vec[:k].reshape(n_assets, feature_lags),
                   vec[k:k + n_assets], vec[k + n_assets:])

    def to_dict(self):
        return {
            "feature_weights": self.feature_weights.tolist(),
            "recurrence_weights": self.recurrence_weights.tolist(),
            "bias": self.bias.tolist(),
        }


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 500
    feature_lags: int = 21
    reward_kind: RewardKind = RewardKind.SHARPE
    ratio_config: RatioConfig = field(default_factory=RatioConfig)
    cost_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "reward_kind", RewardKind(self.reward_kind))
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.feature_lags) != self.feature_lags or self.feature_lags < 1:
            raise InvalidInputError(f"feature_lags must be >= 1, got {self.feature_lags}")
        if not (math.isfinite(self.cost_rate) and self.cost_rate >= 0):
            raise InvalidInputError(f"cost_rate must be >= 0, got {self.cost_rate}")


@dataclass(frozen=True, eq=False)
class EpisodeResult:
    weight_path: np.ndarray  # (n_decisions, n_assets); row k is decided after return row k + lags - 1
    portfolio_returns: np.ndarray  # realized from return row `feature_lags` onward
    reward: float
    rho: float | None = None


@dataclass(frozen=True, eq=False)
class TrainResult:
    params: PolicyParams
    reward_trace: np.ndarray
    best_reward: float
    best_epoch: int


# --- compiled kernels -------------------------------------------------------

@njit(cache=True)
def _softmax(s):
    m = s.max()
    e = np.exp(s - m)
    return e / e.sum()


@njit(cache=True)
def _policy_path(R, W, u, b, w_init):
    """Decisions for every return row t >= L - 1, each using rows t-L+1..t."""
    T, n = R.shape
    L = W.shape[1]
    out = np.empty((T - L + 1, n))
    prev = w_init.copy()
    s = np.empty(n)
    for t in range(L - 1, T):
        for i in range(n):
            acc = 0.0
            for j in range(L):
                acc += W[i, j] * R[t - j, i]
            s[i] = acc + u[i] * prev[i] + b[i]
        w = _softmax(s)
        out[t - L + 1] = w
        prev = w
    return out


@njit(cache=True)
def _realized(R, path, L, cost):
    T, n = R.shape
    rp = np.empty(T - L)
    for t in range(L, T):
        k = t - L + 1
        acc = 0.0
        turn = 0.0
        for i in range(n):
            acc += path[k - 1, i] * R[t, i]
            turn += abs(path[k, i] - path[k - 1, i])
        rp[t - L] = acc - cost * turn
    return rp


@njit(cache=True)
def _backward(R, path, W, u, w_init, cost, G):
    """Gradient of sum_t G[t] * rp[t] with respect to (W, u, b)."""
    T, n = R.shape
    L = W.shape[1]
    K = T - L + 1
    gpath = np.zeros((K, n))
    for t in range(L, T):
        k = t - L + 1
        g = G[t - L]
        for i in range(n):
            gpath[k - 1, i] += g * R[t, i]
            if cost > 0.0:
                d = path[k, i] - path[k - 1, i]
                sg = 1.0 if d > 0.0 else (-1.0 if d < 0.0 else 0.0)
                gpath[k, i] -= g * cost * sg
                gpath[k - 1, i] += g * cost * sg
    gW = np.zeros((n, L))
    gu = np.zeros(n)
    gb = np.zeros(n)
    gs = np.empty(n)
    for k in range(K - 1, -1, -1):
        t = k + L - 1
        inner = 0.0
        for i in range(n):
            inner += gpath[k, i] * path[k, i]
        for i in range(n):
            gs[i] = path[k, i] * (gpath[k, i] - inner)
        for i in range(n):
            for j in range(L):
                gW[i, j] += gs[i] * R[t - j, i]
            prev = path[k - 1, i] if k > 0 else w_init[i]
            gu[i] += gs[i] * prev
            gb[i] += gs[i]
            if k > 0:
                gpath[k - 1, i] += gs[i] * u[i]
    return gW, gu, gb


# --- python surface ---------------------------------------------------------

def _as_matrix(returns_window):
    r = np.asarray(getattr(returns_window, "returns", returns_window), dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    if r.ndim != 2 or not np.all(np.isfinite(r)):
        raise InvalidInputError("returns window must be a finite 2-D table")
    return np.ascontiguousarray(r)


def _check_params(params, n_assets, feature_lags):
    if params.n_assets != n_assets or params.feature_lags != feature_lags:
        raise InvalidInputError(
            f"params are for {params.n_assets} assets x {params.feature_lags} lags, "
            f"data has {n_assets} assets and config {feature_lags} lags")


def forward(params, features, prev_weights):
    """One allocation decision.

    Args:
        params: Policy parameters.
        features: ``(n_assets, feature_lags)`` lagged returns, most recent first.
        prev_weights: Previous allocation (non-negative, sums to 1).
    """
    x = np.asarray(features, dtype=float)
    prev = np.asarray(prev_weights, dtype=float)
    if x.shape != params.feature_weights.shape or prev.shape != (params.n_assets,):
        raise InvalidInputError(
            f"features {x.shape} / prev_weights {prev.shape} do not match params "
            f"{params.feature_weights.shape}")
    if np.any(prev < 0) or abs(prev.sum() - 1.0) > 1e-10:
        raise InvalidInputError("prev_weights must be non-negative and sum to 1")
    scores = np.sum(params.feature_weights * x, axis=1) + params.recurrence_weights * prev + params.bias
    return _softmax(scores)


def policy_path(params, returns, w_init=None):
    """Run the frozen policy over a return history.

    Row ``k`` of the result is the allocation decided after observing return
    row ``k + feature_lags - 1``; it never depends on later rows.
    """
    R = _as_matrix(returns)
    _check_params(params, R.shape[1], params.feature_lags)
    if R.shape[0] < params.feature_lags:
        raise InsufficientDataError(
            f"need at least {params.feature_lags} return rows, got {R.shape[0]}")
    w0 = np.full(R.shape[1], 1.0 / R.shape[1]) if w_init is None else np.asarray(w_init, float)
    return _policy_path(R, params.feature_weights, params.recurrence_weights, params.bias, w0)


def _reward_partials(rp, config):
    """Reward plus its partial derivatives in the window mean and std."""
    mu = float(rp.mean())
    sd = float(rp.std(ddof=1))
    rf = config.ratio_config.risk_free
    if not sd > 0:
        raise DegenerateRiskError("portfolio returns have zero variance over the window")
    if config.reward_kind is RewardKind.SHARPE:
        value = sharpe(mu, rf, sd)
        d_mu = 1.0 / sd
        d_sd = -value / sd
        regime = None
    else:
        regime = rho_for(rp, config.ratio_config)
        value = market_adaptive_ratio(mu, rf, sd, regime)
        x = mu - rf
        d_mu = regime * abs(x) ** (regime - 1.0) / sd ** (1.0 / regime) if x != 0 else 0.0
        d_sd = -(value / regime) / sd
    return value, d_mu, d_sd, mu, sd, regime


def _check_window(R, config):
    if R.shape[0] <= config.feature_lags + 1:
        raise InsufficientDataError(
            f"window of {R.shape[0]} rows is too short for {config.feature_lags} lags")


def episode(params, returns_window, config):
    """Roll the policy through a window and score the realized returns.

    The return at row ``t`` is earned by the weights decided after row
    ``t - 1``; switching to the new decision costs
    ``cost_rate * ||w_t - w_{t-1}||_1``.
    """
    R = _as_matrix(returns_window)
    _check_window(R, config)
    _check_params(params, R.shape[1], config.feature_lags)
    w0 = np.full(R.shape[1], 1.0 / R.shape[1])
    path = _policy_path(R, params.feature_weights, params.recurrence_weights, params.bias, w0)
    rp = _realized(R, path, config.feature_lags, config.cost_rate)
    value, _, _, _, _, regime = _reward_partials(rp, config)
    return EpisodeResult(path, rp, value, regime)


def _reward_and_gradient(params, R, config):
    w0 = np.full(R.shape[1], 1.0 / R.shape[1])
    path = _policy_path(R, params.feature_weights, params.recurrence_weights, params.bias, w0)
    rp = _realized(R, path, config.feature_lags, config.cost_rate)
    value, d_mu, d_sd, mu, sd, _ = _reward_partials(rp, config)
    n = rp.size
    G = d_mu / n + d_sd * (rp - mu) / ((n - 1) * sd)
    gW, gu, gb = _backward(R, path, params.feature_weights, params.recurrence_weights,
                           w0, config.cost_rate, G)
    if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gu)) and np.all(np.isfinite(gb))):
        return value, None
    return value, PolicyParams(gW, gu, gb)


def gradient(params, returns_window, config):
    """Exact gradient of the episode reward with respect to every parameter.

    Returned as a :class:`PolicyParams` of the same shapes.
    """
    R = _as_matrix(returns_window)
    _check_window(R, config)
    _check_params(params, R.shape[1], config.feature_lags)
    value, grad = _reward_and_gradient(params, R, config)
    if grad is None or not math.isfinite(value):
        raise NumericalFailureError("non-finite reward gradient")
    return grad


def _step(params, grad, lr):
    return PolicyParams(
        params.feature_weights + lr * grad.feature_weights,
        params.recurrence_weights + lr * grad.recurrence_weights,
        params.bias + lr * grad.bias,
    )


def init_params(n_assets, config):
    return PolicyParams.random(n_assets, config.feature_lags, seed=config.seed)


def train(params, returns_window, config):
    """Full-batch gradient ascent; returns the best parameters seen.

    The reward trace has ``epochs + 1`` entries: the reward before each of
    the ``epochs`` updates, then the reward of the final parameters.
    """
    R = _as_matrix(returns_window)
    _check_window(R, config)
    _check_params(params, R.shape[1], config.feature_lags)
    trace = np.empty(config.epochs + 1)
    best, best_value, best_epoch = params, -math.inf, 0
    for epoch in range(config.epochs + 1):
        try:
            value, grad = _reward_and_gradient(params, R, config)
        except DegenerateRiskError as exc:
            raise NumericalFailureError(str(exc), epoch=epoch) from exc
        if not math.isfinite(value):
            raise NumericalFailureError("reward is not finite", epoch=epoch)
        trace[epoch] = value
        if value > best_value:
            best, best_value, best_epoch = params, value, epoch
        if epoch == config.epochs:
            break
        if grad is None:
            raise NumericalFailureError("gradient is not finite", epoch=epoch)
        try:
            params = _step(params, grad, config.learning_rate)
        except InvalidInputError as exc:
            raise NumericalFailureError(str(exc), epoch=epoch) from exc
    return TrainResult(best, trace, best_value, best_epoch)


def with_reward(config, kind):
    return replace(config, reward_kind=RewardKind(kind))
