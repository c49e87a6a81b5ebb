"""Regime-aware risk-adjusted returns and a rolling-window portfolio backtester.

The Market-adaptive Ratio raises excess return to the power ``rho`` and risk
to ``1/rho``, where ``rho = 2 / (1 + exp(-alpha * R))`` reads the recent
return ``R`` as a bull (``rho > 1``) or bear (``rho < 1``) signal.
"""

from .allocators import (
    MomentEstimate,
    equal_weight,
    estimate_moments,
    risk_budgeting,
    risk_contributions,
    tangency,
)
from .backtest import BacktestConfig, BacktestReport, StrategySpec, compute_metrics, run
from .data import PriceTable, ReturnTable, SynthConfig, align, load_csv, synth_market, to_returns, write_csv
from .ratios import (
    RatioConfig,
    beta,
    compute_stats,
    information_ratio,
    market_adaptive_ratio,
    regime_return,
    rho,
    sharpe,
    sortino,
    treynor,
)
from .rrl import PolicyParams, RewardKind, TrainConfig, episode, forward, gradient, train

__version__ = "0.1.0"
