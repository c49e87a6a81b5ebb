import math

import numpy as np
import pytest

from marketadaptive.backtest import (
    BacktestConfig,
    StrategySpec,
    add_months,
    compute_metrics,
    parse_period,
    rebalance_dates,
    rolling_schedule,
    run,
)
from marketadaptive.data import PriceTable, Regime, SynthConfig, synth_market
from marketadaptive.errors import (
    ConfigError,
    DegenerateRiskError,
    InsufficientDataError,
    InvalidCalendarError,
    InvalidInputError,
)

from conftest import weekday_calendar


def config(pre, test, strategies=(), **kw):
    return BacktestConfig(pretrain_range=pre, test_range=test, strategies=strategies, **kw)


def small_market(seed=0, n_days=190, drift=0.05, vol=0.2, start="2020-01-01", correlation=0.3):
    return synth_market(SynthConfig(n_days, [Regime(n_days, drift, vol)], correlation=correlation,
                                    seed=seed, start_date=start))


class TestPeriods:
    @pytest.mark.parametrize("text, months", [("1Y", 12), ("1Q", 3), ("3M", 3), ("1m", 1), (6, 6)])
    def test_parse(self, text, months):
        assert parse_period(text) == months

    @pytest.mark.parametrize("bad", ["", "1W", "0M", "Y", -1])
    def test_parse_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_period(bad)

    def test_add_months_clips_day(self):
        assert add_months("2020-01-31", 1) == np.datetime64("2020-02-29")
        assert add_months("2021-01-31", 1) == np.datetime64("2021-02-28")
        assert add_months("2015-01-01", 12) == np.datetime64("2016-01-01")


class TestConfig:
    def test_pretrain_must_precede_test(self):
        with pytest.raises(ConfigError):
            config(("2010-01-01", "2015-01-01"), ("2015-01-01", "2016-01-01"))

    def test_empty_range(self):
        with pytest.raises(ConfigError):
            config(("2010-01-01", "2009-01-01"), ("2015-01-01", "2016-01-01"))

    def test_bad_factor(self):
        with pytest.raises(ConfigError):
            config(("2010-01-01", "2010-12-31"), ("2011-01-01", "2011-12-31"), annualization_factor=0)

    def test_strategy_validation(self):
        with pytest.raises(ConfigError):
            StrategySpec("Momentum")
        with pytest.raises(ConfigError):
            StrategySpec("Tangency", params={"epochs": 3})
        with pytest.raises(ConfigError):
            config(("2010-01-01", "2010-12-31"), ("2011-01-01", "2011-12-31"),
                   [{"kind": "EqualWeight"}, {"kind": "EqualWeight"}])
        s = StrategySpec.from_dict({"kind": "RRLSharpe", "name": "r", "epochs": 5})
        assert s.params == {"epochs": 5} and s.name == "r"


class TestSchedule:
    def test_eight_annual_segments(self):
        cal = weekday_calendar("2010-01-01", "2022-12-31")
        cfg = config(("2010-01-01", "2014-12-31"), ("2015-01-01", "2022-12-31"))
        segs = rolling_schedule(cal, cfg)
        assert len(segs) == 8
        assert segs[0].train == (np.datetime64("2010-01-01"), np.datetime64("2014-12-31"))
        assert segs[0].test == (np.datetime64("2015-01-01"), np.datetime64("2015-12-31"))
        for k, s in enumerate(segs):
            assert s.test[0].astype(object).year == 2015 + k
            assert s.train[0] == np.datetime64("2010-01-01")
            assert s.train[1] == cal[cal < s.test[0]][-1]

    def test_tiling(self):
        cal = weekday_calendar("2010-01-01", "2022-12-31")
        cfg = config(("2010-01-01", "2014-12-31"), ("2015-03-10", "2022-06-30"), retrain_every="1Q")
        covered = np.concatenate([cal[(cal >= s.test[0]) & (cal <= s.test[1])]
                                  for s in rolling_schedule(cal, cfg)])
        expected = cal[(cal >= cfg.test_range[0]) & (cal <= cfg.test_range[1])]
        assert np.array_equal(covered, expected)  # ordered, so also pairwise disjoint

    def test_single_segment(self):
        cal = weekday_calendar("2014-01-01", "2015-12-31")
        segs = rolling_schedule(cal, config(("2014-01-01", "2014-12-31"), ("2015-01-01", "2015-12-31")))
        assert len(segs) == 1

    def test_gap_in_calendar(self):
        cal = weekday_calendar("2014-01-01", "2014-12-31")
        with pytest.raises(InvalidCalendarError):
            rolling_schedule(cal, config(("2014-01-01", "2014-06-30"), ("2015-01-01", "2015-12-31")))


class TestRebalanceDates:
    def test_monthly_matches_enumeration(self):
        cal = weekday_calendar("2019-01-01", "2019-12-31")
        expected = []
        for m in range(1, 13):
            days = [d for d in cal if d.astype(object).month == m]
            expected.append(days[0])
        got = rebalance_dates(cal, "1M", ("2019-01-01", "2019-12-31"))
        assert got.tolist() == [d.astype(object) for d in expected]

    def test_quarterly(self):
        cal = weekday_calendar("2019-01-01", "2019-12-31")
        got = rebalance_dates(cal, "1Q", ("2019-01-01", "2019-12-31"))
        assert [str(d) for d in got] == ["2019-01-01", "2019-04-01", "2019-07-01", "2019-10-01"]

    def test_short_range(self):
        cal = weekday_calendar("2019-01-01", "2019-12-31")
        assert [str(d) for d in rebalance_dates(cal, "1M", ("2019-03-05", "2019-03-20"))] == ["2019-03-05"]

    def test_errors(self):
        cal = weekday_calendar("2019-01-01", "2019-02-28")
        with pytest.raises(InvalidCalendarError):
            rebalance_dates(cal[::-1], "1M", ("2019-01-01", "2019-02-28"))
        with pytest.raises(InvalidInputError):
            rebalance_dates(cal, "1M", ("2019-05-01", "2019-05-31"))


class TestMetrics:
    def test_hand_series(self):
        # mean 0.005, sample var 0.0013 / 3
        m = compute_metrics([0.01, -0.02, 0.03, 0.0], 0.0, 252)
        assert m["profit"] == pytest.approx(1.26, abs=1e-12)
        assert m["risk"] == pytest.approx(math.sqrt(0.0013 / 3 * 252), abs=1e-12)
        assert m["risk"] == pytest.approx(0.3304542328, abs=1e-9)
        assert m["sharpe"] == pytest.approx(3.8129334558, abs=1e-9)

    def test_risk_free_annual(self):
        m = compute_metrics([0.01, -0.02, 0.03, 0.0], 0.26, 252)
        assert m["sharpe"] == pytest.approx(1.0 / m["risk"], abs=1e-12)

    def test_constant(self):
        with pytest.raises(DegenerateRiskError):
            compute_metrics([0.001] * 10)

    def test_alternating(self):
        m = compute_metrics([0.01, -0.01] * 50)
        assert m["profit"] == pytest.approx(0, abs=1e-15)
        assert m["sharpe"] == pytest.approx(0, abs=1e-13)


def hand_equal_weight(prices, test_start, test_end):
    """Share-count simulation of a 50/50 book rebalanced on each month's first test day."""
    wealth, shares, month, curve = 1.0, None, None, [1.0]
    for i in range(1, len(prices)):
        d = prices.dates[i]
        if d < np.datetime64(test_start) or d > np.datetime64(test_end):
            continue
        if d.astype("datetime64[M]") != month:
            month = d.astype("datetime64[M]")
            shares = wealth * 0.5 / prices.prices[i - 1]
        wealth = float(shares @ prices.prices[i])
        curve.append(wealth)
    return np.array(curve)


class TestRun:
    def test_equal_weight_hand_simulation(self):
        prices = small_market(seed=4)
        cfg = config(("2020-01-01", "2020-01-31"), ("2020-02-01", "2020-07-31"), [{"kind": "EqualWeight"}])
        res = run(cfg, prices)["EqualWeight"]
        hand = hand_equal_weight(prices, "2020-02-01", "2020-07-31")
        assert res.equity_curve.shape == hand.shape
        assert np.max(np.abs(res.equity_curve - hand)) < 1e-12
        assert len(res.rebalance_dates) == 6
        assert np.all(res.weight_trajectory == 0.5)

    def test_empty_strategy_list(self):
        report = run(config(("2020-01-01", "2020-01-31"), ("2020-02-01", "2020-07-31")), small_market())
        assert report.strategies == [] and len(report.schedule) == 1
        assert report.to_dict()["strategies"] == []

    @pytest.fixture(scope="class")
    @classmethod
    def report(cls):
        prices = small_market(seed=9, n_days=520, start="2018-01-01")
        cfg = config(("2018-01-01", "2018-12-31"), ("2019-01-01", "2019-12-31"),
                     [{"kind": k} for k in ("EqualWeight", "Tangency", "RiskBudgeting")]
                     + [{"kind": "RRLSharpe", "epochs": 20, "feature_lags": 5}],
                     retrain_every="1Q", risk_free=0.01)
        return cfg, prices, run(cfg, prices)

    def test_report_invariants(self, report):
        cfg, _, rep = report
        assert len(rep.schedule) == 4
        for s in rep.strategies:
            assert s.equity_curve[0] == 1.0
            assert abs(s.equity_curve[-1] - np.prod(1 + s.portfolio_returns)) < 1e-10
            assert s.risk >= 0
            assert abs(s.sharpe - (s.profit - cfg.risk_free) / s.risk) < 1e-10
            assert np.allclose(s.weight_trajectory.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(s.weight_trajectory >= 0)
        assert rep.metadata["train_window"] == "expanding"
        assert len(rep["RRLSharpe"].fits) == 4

    def test_deterministic(self, report):
        cfg, prices, rep = report
        assert run(cfg, prices).to_dict() == rep.to_dict()

    def test_no_look_ahead(self, report):
        cfg, prices, rep = report
        t = np.datetime64("2019-07-15")
        cut = prices.slice_dates(None, t)
        short = BacktestConfig(pretrain_range=cfg.pretrain_range, test_range=(cfg.test_range[0], t),
                               strategies=cfg.strategies, retrain_every=cfg.retrain_every,
                               risk_free=cfg.risk_free)
        rep2 = run(short, cut)
        for a, b in zip(rep.strategies, rep2.strategies):
            keep = a.rebalance_dates <= t
            assert np.array_equal(a.rebalance_dates[keep], b.rebalance_dates)
            assert np.array_equal(a.weight_trajectory[keep], b.weight_trajectory)

    def test_tangency_fallback_is_recorded(self):
        prices = small_market(seed=1, drift=-2.0, vol=0.1, correlation=0.0)
        cfg = config(("2020-01-01", "2020-01-31"), ("2020-02-01", "2020-04-30"), [{"kind": "Tangency"}])
        res = run(cfg, prices)["Tangency"]
        assert res.events and res.events[0]["event"] == "tangency_fallback_equal_weight"
        assert np.all(res.weight_trajectory[0] == 0.5)

    def test_coverage_errors(self):
        prices = small_market(start="2020-03-02")
        with pytest.raises(InsufficientDataError, match="'A'.*2020-01-31"):
            run(config(("2020-01-01", "2020-01-31"), ("2020-04-01", "2020-05-31"), [{"kind": "EqualWeight"}]),
                prices)
        with pytest.raises(InsufficientDataError, match="test start"):
            run(config(("2020-03-02", "2020-04-30"), ("2024-01-01", "2024-05-31")), prices)

    def test_single_row(self):
        p = PriceTable(np.array(["2020-01-01"], dtype="datetime64[D]"), ("A",), [[1.0]])
        with pytest.raises(InsufficientDataError):
            run(config(("2020-01-01", "2020-01-01"), ("2020-01-02", "2020-01-03")), p)
