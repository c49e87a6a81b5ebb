"""Risk-adjusted return ratios and the return statistics they consume.

Contains the four classical ratios (Sharpe, Treynor, Sortino, Information),
the regime coefficient ``rho`` and the Market-adaptive Ratio built on it.
Every function is pure; standard deviations use the sample (n - 1)
convention throughout.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    DegenerateBenchmarkError,
    DegenerateBetaError,
    DegenerateDownsideError,
    DegenerateRiskError,
    DegenerateTrackingError,
    InsufficientDataError,
    InvalidInputError,
    InvalidRegimeError,
)

DEFAULT_ALPHA = 5.0
# rho saturates in floating point for |alpha * R| beyond ~37; keep it inside (0, 2)
_RHO_MIN = math.nextafter(0.0, 1.0)
_RHO_MAX = math.nextafter(2.0, 0.0)
DEFAULT_REGIME_LOOKBACK = 21


@dataclass(frozen=True)
class ReturnStats:
    mean: float
    std: float
    downside_dev: float
    count: int


@dataclass(frozen=True)
class RatioConfig:
    """Parameters of the regime coefficient and the Market-adaptive Ratio.

    Attributes:
        alpha: Steepness of the sigmoid mapping regime return to ``rho``.
        risk_free: Per-period risk-free rate.
        regime_lookback: Number of trailing periods compounded into the
            regime return.
        fixed_regime_return: If set, used instead of the trailing return.
            Pinning it to 0 forces ``rho == 1``, where the Market-adaptive
            Ratio coincides with the Sharpe Ratio.
    """

    alpha: float = DEFAULT_ALPHA
    risk_free: float = 0.0
    regime_lookback: int = DEFAULT_REGIME_LOOKBACK
    fixed_regime_return: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInputError(f"alpha must be > 0, got {self.alpha}")
        if not math.isfinite(self.risk_free):
            raise InvalidInputError("risk_free must be finite")
        if int(self.regime_lookback) != self.regime_lookback or self.regime_lookback < 1:
            raise InvalidInputError(
                f"regime_lookback must be a positive integer, got {self.regime_lookback}")
        if self.fixed_regime_return is not None and not math.isfinite(self.fixed_regime_return):
            raise InvalidInputError("fixed_regime_return must be finite")


@dataclass(frozen=True)
class BenchmarkStats:
    beta: float
    benchmark_return: float
    tracking_error: float


def _as_series(values, name="returns"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _check_finite(**kwargs):
    for name, value in kwargs.items():
        if not math.isfinite(value):
            raise InvalidInputError(f"{name} must be finite, got {value}")


def compute_stats(returns, downside_threshold=0.0):
    """Mean, sample standard deviation and downside deviation of a series.

    The downside deviation averages squared shortfalls below
    ``downside_threshold`` over all observations, not just the losing ones.
    """
    r = _as_series(returns)
    if r.size < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {r.size}")
    _check_finite(downside_threshold=downside_threshold)
    shortfall = np.minimum(r - downside_threshold, 0.0)
    # a constant series has exactly zero spread; rounding in the mean would not
    std = 0.0 if np.all(r == r[0]) else float(r.std(ddof=1))
    return ReturnStats(
        mean=float(r.mean()),
        std=std,
        downside_dev=float(np.sqrt(np.mean(shortfall ** 2))),
        count=int(r.size),
    )


def sharpe(mu, risk_free, sigma):
    _check_finite(mu=mu, risk_free=risk_free, sigma=sigma)
    if sigma <= 0:
        raise DegenerateRiskError(f"Sharpe ratio undefined for sigma={sigma}")
    return (mu - risk_free) / sigma


def treynor(mu, risk_free, beta):
    _check_finite(mu=mu, risk_free=risk_free, beta=beta)
    if beta == 0:
        raise DegenerateBetaError("Treynor ratio undefined for zero beta")
    return (mu - risk_free) / beta


def beta(portfolio_returns, benchmark_returns):
    """OLS slope of portfolio returns on benchmark returns."""
    p = _as_series(portfolio_returns, "portfolio_returns")
    b = _as_series(benchmark_returns, "benchmark_returns")
    if p.size != b.size:
        raise InvalidInputError(f"length mismatch: {p.size} vs {b.size}")
    if p.size < 2:
        raise InsufficientDataError("need at least 2 observations")
    bc = b - b.mean()
    var_b = float(bc @ bc) / (b.size - 1)
    if var_b <= 0:
        raise DegenerateBenchmarkError("benchmark has zero variance")
    cov = float((p - p.mean()) @ bc) / (b.size - 1)
    return cov / var_b


def sortino(mu, risk_free, downside_dev):
    _check_finite(mu=mu, risk_free=risk_free, downside_dev=downside_dev)
    if downside_dev <= 0:
        raise DegenerateDownsideError(
            "Sortino ratio undefined: no observations below the threshold")
    return (mu - risk_free) / downside_dev


def benchmark_stats(portfolio_returns, benchmark_returns):
    p = _as_series(portfolio_returns, "portfolio_returns")
    b = _as_series(benchmark_returns, "benchmark_returns")
    if p.size != b.size:
        raise InvalidInputError(f"length mismatch: {p.size} vs {b.size}")
    return BenchmarkStats(
        beta=beta(p, b),
        benchmark_return=float(b.mean()),
        tracking_error=float((p - b).std(ddof=1)),
    )


def information_ratio(portfolio_returns, benchmark_returns):
    """Mean active return over the sample standard deviation of active returns."""
    p = _as_series(portfolio_returns, "portfolio_returns")
    b = _as_series(benchmark_returns, "benchmark_returns")
    if p.size != b.size:
        raise InvalidInputError(f"length mismatch: {p.size} vs {b.size}")
    if p.size < 2:
        raise InsufficientDataError("need at least 2 observations")
    active = p - b
    te = float(active.std(ddof=1))
    if te <= 0:
        raise DegenerateTrackingError("zero tracking error")
    return float(active.mean()) / te


def rho(regime_return, alpha=DEFAULT_ALPHA):
    """Regime coefficient in (0, 2): ``2 / (1 + exp(-alpha * R))``.

    Values above 1 mark a bull regime, values below 1 a bear regime.
    """
    _check_finite(regime_return=regime_return, alpha=alpha)
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be > 0, got {alpha}")
    z = alpha * regime_return
    # two branches keep exp() from overflowing for large |z|
    if z >= 0:
        return min(2.0 / (1.0 + math.exp(-z)), _RHO_MAX)
    e = math.exp(z)
    return max(2.0 * e / (1.0 + e), _RHO_MIN)


def market_adaptive_ratio(mu, risk_free, sigma, rho):
    """``sgn(mu - rf) * |mu - rf| ** rho / sigma ** (1 / rho)``.

    Reduces to the Sharpe Ratio at ``rho == 1``.
    """
    _check_finite(mu=mu, risk_free=risk_free, sigma=sigma, rho=rho)
    if sigma <= 0:
        raise DegenerateRiskError(f"Market-adaptive Ratio undefined for sigma={sigma}")
    if not 0.0 < rho < 2.0:
        raise InvalidRegimeError(f"rho must lie in (0, 2), got {rho}")
    excess = mu - risk_free
    if excess == 0:
        return 0.0
    return math.copysign(abs(excess) ** rho / sigma ** (1.0 / rho), excess)


def regime_return(returns, lookback=DEFAULT_REGIME_LOOKBACK):
    """Compounded return over the trailing ``lookback`` periods."""
    r = _as_series(returns)
    if int(lookback) != lookback or lookback < 1:
        raise InvalidInputError(f"lookback must be a positive integer, got {lookback}")
    if r.size < lookback:
        raise InsufficientDataError(
            f"regime return needs {lookback} observations, got {r.size}")
    return float(np.prod(1.0 + r[r.size - lookback:]) - 1.0)


def rho_for(returns, config):
    """Regime coefficient for a return history under ``config``."""
    if config.fixed_regime_return is not None:
        return rho(config.fixed_regime_return, config.alpha)
    return rho(regime_return(returns, config.regime_lookback), config.alpha)
