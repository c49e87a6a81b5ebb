"""Rolling-window backtest: pretrain, periodic retraining, periodic rebalancing.

Every strategy is refit at the start of each test segment on an expanding
window that ends the trading day before the segment begins. Inside a
segment, target weights are recomputed on each rebalance date from returns
dated strictly before it, and holdings drift with prices in between.
"""

from dataclasses import dataclass, field, replace
import math
import re

import numpy as np

from . import allocators
from .data import to_returns
from .errors import (
    ConfigError,
    DegenerateRiskError,
    InsufficientDataError,
    InvalidCalendarError,
    InvalidInputError,
    NoTangencyError,
)
from .ratios import RatioConfig, compute_stats
from .rrl import RewardKind, TrainConfig, init_params, policy_path, train

STRATEGY_KINDS = ("EqualWeight", "Tangency", "RiskBudgeting", "RRLSharpe", "RRLMarketAdaptive")
_PERIOD_RE = re.compile(r"^\s*(\d+)\s*([YQM])\s*$", re.IGNORECASE)
_TRAIN_FIELDS = ("learning_rate", "epochs", "feature_lags", "cost_rate", "seed")


def parse_period(period):
    """Length of a calendar period in months: ``"1Y"`` -> 12, ``"3M"`` -> 3."""
    if isinstance(period, int):
        months = period
    else:
        m = _PERIOD_RE.match(str(period))
        if not m:
            raise ConfigError(f"unrecognized period {period!r}; use e.g. '1Y', '1Q', '1M'")
        months = int(m.group(1)) * {"Y": 12, "Q": 3, "M": 1}[m.group(2).upper()]
    if months < 1:
        raise ConfigError(f"period must be at least one month, got {period!r}")
    return months


def add_months(date, months):
    """Shift a date by whole months, clipping the day to the target month's end."""
    d = np.datetime64(date, "D")
    month = d.astype("datetime64[M]")
    day = int((d - month.astype("datetime64[D]")).astype(int))
    target = month + np.timedelta64(months, "M")
    last_day = int(((target + 1).astype("datetime64[D]") - target.astype("datetime64[D]")).astype(int)) - 1
    return target.astype("datetime64[D]") + min(day, last_day)


def _date(value):
    try:
        return np.datetime64(value, "D")
    except (ValueError, TypeError):
        raise ConfigError(f"bad date {value!r}") from None


def _date_range(pair, name):
    if len(pair) != 2:
        raise ConfigError(f"{name} must be [start, end]")
    start, end = _date(pair[0]), _date(pair[1])
    if start > end:
        raise ConfigError(f"{name} is empty: {start} > {end}")
    return (start, end)


@dataclass(frozen=True)
class StrategySpec:
    """One strategy to evaluate.

    ``params`` by kind: Tangency/RiskBudgeting accept ``window`` (moment
    window in periods, default all history) and RiskBudgeting ``budgets``;
    the RRL kinds accept the :class:`~marketadaptive.rrl.TrainConfig`
    fields ``learning_rate``, ``epochs``, ``feature_lags``, ``cost_rate``
    and ``seed``.
    """

    kind: str
    name: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy kind {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.name is None:
            object.__setattr__(self, "name", self.kind)
        object.__setattr__(self, "params", dict(self.params))
        allowed = {
            "EqualWeight": (),
            "Tangency": ("window",),
            "RiskBudgeting": ("window", "budgets"),
        }.get(self.kind, _TRAIN_FIELDS)
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ConfigError(f"strategy {self.name!r}: unknown parameters {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        name = d.pop("name", None)
        params = d.pop("params", {})
        params = {**params, **d}
        return cls(kind, name, params)


@dataclass(frozen=True)
class BacktestConfig:
    pretrain_range: tuple
    test_range: tuple
    retrain_every: str = "1Y"
    rebalance_every: str = "1M"
    strategies: tuple = ()
    annualization_factor: float = 252.0
    risk_free: float = 0.0  # annual
    ratio: RatioConfig = field(default_factory=RatioConfig)
    cost_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pretrain_range", _date_range(self.pretrain_range, "pretrain_range"))
        object.__setattr__(self, "test_range", _date_range(self.test_range, "test_range"))
        if self.pretrain_range[1] >= self.test_range[0]:
            raise ConfigError(
                f"pretrain end {self.pretrain_range[1]} must precede test start {self.test_range[0]}")
        parse_period(self.retrain_every)
        parse_period(self.rebalance_every)
        strategies = tuple(s if isinstance(s, StrategySpec) else StrategySpec.from_dict(s)
                           for s in self.strategies)
        names = [s.name for s in strategies]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate strategy names: {names}")
        object.__setattr__(self, "strategies", strategies)
        if not (math.isfinite(self.annualization_factor) and self.annualization_factor > 0):
            raise ConfigError("annualization_factor must be > 0")
        if not math.isfinite(self.risk_free):
            raise ConfigError("risk_free must be finite")
        if not (math.isfinite(self.cost_rate) and self.cost_rate >= 0):
            raise ConfigError("cost_rate must be >= 0")
        if not isinstance(self.ratio, RatioConfig):
            raise ConfigError("ratio must be a RatioConfig")

    @property
    def risk_free_per_period(self):
        return self.risk_free / self.annualization_factor


@dataclass(frozen=True)
class Segment:
    train: tuple  # first and last trading date used for fitting
    test: tuple  # first and last trading date of the out-of-sample segment


@dataclass(eq=False)
class StrategyResult:
    name: str
    kind: str
    profit: float
    risk: float
    sharpe: float
    whole_period: dict
    dates: np.ndarray  # test-period return dates
    portfolio_returns: np.ndarray
    equity_dates: np.ndarray
    equity_curve: np.ndarray
    rebalance_dates: np.ndarray
    weight_trajectory: np.ndarray
    fits: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "profit": self.profit,
            "risk": self.risk,
            "sharpe": self.sharpe,
            "whole_period": self.whole_period,
            "equity_curve": [{"date": str(d), "value": float(v)}
                             for d, v in zip(self.equity_dates, self.equity_curve)],
            "weight_trajectory": [{"date": str(d), "weights": [float(x) for x in w]}
                                  for d, w in zip(self.rebalance_dates, self.weight_trajectory)],
            "portfolio_returns": [{"date": str(d), "return": float(r)}
                                  for d, r in zip(self.dates, self.portfolio_returns)],
            "fits": self.fits,
            "events": self.events,
        }


@dataclass(eq=False)
class BacktestReport:
    assets: tuple
    schedule: list
    strategies: list
    metadata: dict

    def __getitem__(self, name):
        for s in self.strategies:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self):
        return {
            "assets": list(self.assets),
            "metadata": self.metadata,
            "schedule": [{"train": [str(s.train[0]), str(s.train[1])],
                          "test": [str(s.test[0]), str(s.test[1])]} for s in self.schedule],
            "strategies": [s.to_dict() for s in self.strategies],
        }


def _check_calendar(calendar):
    cal = np.asarray(calendar, dtype="datetime64[D]")
    if cal.ndim != 1:
        raise InvalidCalendarError("calendar must be one-dimensional")
    if cal.size > 1 and not np.all(np.diff(cal) > np.timedelta64(0, "D")):
        raise InvalidCalendarError("calendar dates must be sorted and unique")
    return cal


def rolling_schedule(calendar, config):
    """Expanding-window (train, test) pairs tiling the test range.

    Test segments start at ``test_start + k * retrain_every`` and are
    clipped to the calendar; the first train range is the pretrain range and
    each later one runs from the pretrain start to the last trading date
    before its segment.
    """
    cal = _check_calendar(calendar)
    months = parse_period(config.retrain_every)
    p_start, p_end = config.pretrain_range
    t_start, t_end = config.test_range

    pre = cal[(cal >= p_start) & (cal <= p_end)]
    if pre.size == 0:
        raise InvalidCalendarError(f"no trading dates in pretrain range {p_start}..{p_end}")

    segments = []
    k = 0
    while True:
        seg_start = add_months(t_start, k * months)
        if seg_start > t_end:
            break
        seg_end = min(add_months(t_start, (k + 1) * months) - 1, t_end)
        days = cal[(cal >= seg_start) & (cal <= seg_end)]
        if days.size == 0:
            raise InvalidCalendarError(f"no trading dates in test segment {seg_start}..{seg_end}")
        if k == 0:
            train = (pre[0], pre[-1])
        else:
            train = (pre[0], cal[cal < days[0]][-1])
        segments.append(Segment(train, (days[0], days[-1])))
        k += 1
    return segments


def rebalance_dates(calendar, period, date_range):
    """First trading date of each period in ``date_range``.

    Periods are consecutive blocks of ``period`` calendar months starting
    with the month containing the range start.
    """
    cal = _check_calendar(calendar)
    months = parse_period(period)
    start, end = np.datetime64(date_range[0], "D"), np.datetime64(date_range[1], "D")
    days = cal[(cal >= start) & (cal <= end)]
    if days.size == 0:
        raise InvalidInputError(f"no trading dates in {start}..{end}")
    offset = (days.astype("datetime64[M]") - start.astype("datetime64[M]")).astype(int)
    bucket = offset // months
    first = np.concatenate([[True], bucket[1:] != bucket[:-1]])
    return days[first]


def compute_metrics(portfolio_returns, risk_free=0.0, annualization_factor=252.0):
    """Annualized (profit, risk, sharpe); ``risk_free`` is an annual rate."""
    stats = compute_stats(portfolio_returns)
    profit = stats.mean * annualization_factor
    risk = stats.std * math.sqrt(annualization_factor)
    if not risk > 0:
        raise DegenerateRiskError("portfolio returns have zero variance")
    return {"profit": profit, "risk": risk, "sharpe": (profit - risk_free) / risk}


def _train_config(spec, config):
    kind = RewardKind.SHARPE if spec.kind == "RRLSharpe" else RewardKind.MARKET_ADAPTIVE
    ratio = replace(config.ratio, risk_free=config.risk_free_per_period)
    fields = {k: spec.params[k] for k in _TRAIN_FIELDS if k in spec.params}
    try:
        return TrainConfig(reward_kind=kind, ratio_config=ratio, **fields)
    except InvalidInputError as exc:
        raise ConfigError(f"strategy {spec.name!r}: {exc}") from None


class _Allocator:
    """Fit-then-allocate adapter around one strategy kind."""

    def __init__(self, spec, config, returns):
        self.spec = spec
        self.config = config
        self.returns = returns
        self.n = len(returns.assets)
        self.params = None
        self.train_start = None
        self.events = []
        self.fits = []
        if spec.kind.startswith("RRL"):
            self.train_config = _train_config(spec, config)

    def fit(self, segment):
        self.train_start = segment.train[0]
        if not self.spec.kind.startswith("RRL"):
            return
        window = self.returns.between(*segment.train)
        tc = self.train_config
        result = train(init_params(self.n, tc), window, tc)
        self.params = result.params
        self.fits.append({
            "train": [str(segment.train[0]), str(segment.train[1])],
            "best_reward": result.best_reward,
            "best_epoch": result.best_epoch,
            "initial_reward": float(result.reward_trace[0]),
        })

    def weights(self, date):
        kind = self.spec.kind
        if kind == "EqualWeight":
            return allocators.equal_weight(self.n)
        hist = self.returns.between(self.train_start, np.datetime64(date, "D") - 1)
        if kind.startswith("RRL"):
            return policy_path(self.params, hist)[-1]
        moments = allocators.estimate_moments(hist, self.spec.params.get("window"))
        if kind == "Tangency":
            try:
                return allocators.tangency(moments, self.config.risk_free_per_period)
            except NoTangencyError as exc:
                self.events.append({"date": str(date), "event": "tangency_fallback_equal_weight",
                                    "reason": str(exc)})
                return allocators.equal_weight(self.n)
        return allocators.risk_budgeting(moments.covariance, self.spec.params.get("budgets"))


def _check_coverage(prices, config):
    first, last = prices.dates[0], prices.dates[-1]
    asset = prices.assets[0] if prices.assets else "?"
    if first > config.pretrain_range[1]:
        raise InsufficientDataError(
            f"asset {asset!r}: no price on or before pretrain end {config.pretrain_range[1]} "
            f"(data starts {first})")
    if last < config.test_range[0]:
        raise InsufficientDataError(
            f"asset {asset!r}: no price on or after test start {config.test_range[0]} "
            f"(data ends {last})")


def _simulate(alloc, schedule, config):
    rets = alloc.returns
    rebal_all, traj, dates, rp = [], [], [], []
    current = None
    for seg in schedule:
        alloc.fit(seg)
        rebal = set(rebalance_dates(rets.dates, config.rebalance_every, seg.test).tolist())
        mask = (rets.dates >= seg.test[0]) & (rets.dates <= seg.test[1])
        for d, r in zip(rets.dates[mask], rets.returns[mask]):
            cost = 0.0
            if d.item() in rebal:
                target = np.asarray(alloc.weights(d), dtype=float)
                if current is not None:
                    cost = config.cost_rate * float(np.abs(target - current).sum())
                current = target
                rebal_all.append(d)
                traj.append(target)
            gross = float(current @ r)
            rp.append(gross - cost)
            dates.append(d)
            current = current * (1.0 + r) / (1.0 + gross)
    return (np.array(dates, dtype="datetime64[D]"), np.array(rp),
            np.array(rebal_all, dtype="datetime64[D]"), np.array(traj))


def run(config, prices):
    """Evaluate every configured strategy over the test range."""
    if len(prices) < 2:
        raise InsufficientDataError("price table needs at least 2 rows")
    _check_coverage(prices, config)
    returns = to_returns(prices)
    schedule = rolling_schedule(prices.dates, config)
    start_date = prices.dates[prices.dates < schedule[0].test[0]][-1]

    results = []
    for spec in config.strategies:
        alloc = _Allocator(spec, config, returns)
        dates, rp, rebal, traj = _simulate(alloc, schedule, config)
        metrics = compute_metrics(rp, config.risk_free, config.annualization_factor)
        equity = np.concatenate([[1.0], np.cumprod(1.0 + rp)])
        stats = compute_stats(rp)
        results.append(StrategyResult(
            name=spec.name,
            kind=spec.kind,
            profit=metrics["profit"],
            risk=metrics["risk"],
            sharpe=metrics["sharpe"],
            whole_period={"total_return": float(equity[-1] - 1.0), "mean": stats.mean,
                          "std": stats.std, "periods": stats.count},
            dates=dates,
            portfolio_returns=rp,
            equity_dates=np.concatenate([[start_date], dates]),
            equity_curve=equity,
            rebalance_dates=rebal,
            weight_trajectory=traj,
            fits=alloc.fits,
            events=alloc.events,
        ))

    metadata = {
        "train_window": "expanding",
        "retrain_every": str(config.retrain_every),
        "rebalance_every": str(config.rebalance_every),
        "annualization_factor": config.annualization_factor,
        "risk_free_annual": config.risk_free,
        "cost_rate": config.cost_rate,
        "ratio": {"alpha": config.ratio.alpha, "regime_lookback": config.ratio.regime_lookback,
                  "fixed_regime_return": config.ratio.fixed_regime_return},
        "pretrain_range": [str(d) for d in config.pretrain_range],
        "test_range": [str(d) for d in config.test_range],
    }
    return BacktestReport(prices.assets, schedule, results, metadata)
