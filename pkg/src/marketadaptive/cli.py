"""Command-line interface.

Commands::

    marketadaptive backtest --config run.json --out results/
    marketadaptive ratio-grid --alpha 5 --rf 0 --regimes 0.1,-0.1 \\
        --sigma-min 1 --sigma-max 8 --steps 8 --out grid.csv
    marketadaptive synth --config synth.json --out prices.csv
    marketadaptive validate prices.csv

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Nothing is written unless the command succeeds.
"""

import argparse
from dataclasses import dataclass
import inspect
import json
import math
import os
import re
import shutil
import sys
import tempfile

import numpy as np

from . import backtest as bt
from .data import SynthConfig, align, atomic_write_text, dumps_csv, load_csv, synth_market
from .errors import ConfigError, DataError, MarketAdaptiveError, NumericalError
from .ratios import RatioConfig, market_adaptive_ratio, rho, sharpe

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")
_BACKTEST_KEYS = {"data", "pretrain_range", "test_range", "retrain_every", "rebalance_every",
                  "strategies", "annualization_factor", "risk_free", "ratio", "cost_rate"}


@dataclass(frozen=True)
class RunConfig:
    data: tuple
    backtest: bt.BacktestConfig
    out_dir: str | None = None


def _fmt(x):
    return f"{x:.6f}"


def load_run_config(path, out_dir=None):
    """Parse and validate a backtest JSON config.

    Data paths are resolved relative to the config file's directory.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - _BACKTEST_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("data", "pretrain_range", "test_range"):
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")

    base = os.path.dirname(os.path.abspath(path))
    data = raw["data"] if isinstance(raw["data"], list) else [raw["data"]]
    data = tuple(os.path.join(base, p) for p in data)
    for p in data:
        if not os.path.isfile(p):
            raise ConfigError(f"data file not found: {p}")

    try:
        ratio = RatioConfig(**raw.get("ratio", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad ratio config: {exc}") from None
    if "risk_free" in raw.get("ratio", {}):
        raise ConfigError("set risk_free at the top level (annual rate), not under 'ratio'")
    try:
        cfg = bt.BacktestConfig(
            pretrain_range=tuple(raw["pretrain_range"]),
            test_range=tuple(raw["test_range"]),
            retrain_every=raw.get("retrain_every", "1Y"),
            rebalance_every=raw.get("rebalance_every", "1M"),
            strategies=tuple(raw.get("strategies", ())),
            annualization_factor=float(raw.get("annualization_factor", 252.0)),
            risk_free=float(raw.get("risk_free", 0.0)),
            ratio=ratio,
            cost_rate=float(raw.get("cost_rate", 0.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad backtest config: {exc}") from None
    for spec in cfg.strategies:
        if not _NAME_RE.match(spec.name):
            raise ConfigError(f"strategy name {spec.name!r} must match {_NAME_RE.pattern}")
        if spec.kind.startswith("RRL"):
            bt._train_config(spec, cfg)
    return RunConfig(data, cfg, out_dir)


def metrics_csv(report):
    lines = ["strategy,profit,risk,sharpe"]
    for s in report.strategies:
        lines.append(f"{s.name},{_fmt(s.profit)},{_fmt(s.risk)},{_fmt(s.sharpe)}")
    return "\n".join(lines) + "\n"


def equity_csv(result):
    lines = ["date,equity"]
    lines += [f"{d},{_fmt(v)}" for d, v in zip(result.equity_dates, result.equity_curve)]
    return "\n".join(lines) + "\n"


def weights_csv(result, assets):
    lines = ["date," + ",".join(assets)]
    lines += [f"{d}," + ",".join(_fmt(x) for x in w)
              for d, w in zip(result.rebalance_dates, result.weight_trajectory)]
    return "\n".join(lines) + "\n"


def report_files(report):
    """File name -> text for every backtest output."""
    files = {
        "report.json": json.dumps(report.to_dict(), indent=2) + "\n",
        "metrics.csv": metrics_csv(report),
    }
    for s in report.strategies:
        files[f"equity_{s.name}.csv"] = equity_csv(s)
        files[f"weights_{s.name}.csv"] = weights_csv(s, report.assets)
    return files


def _publish(files, out_dir):
    """Write all files to a staging directory, then move them into place."""
    os.makedirs(out_dir, exist_ok=True)
    stage = tempfile.mkdtemp(dir=out_dir, prefix=".stage-")
    try:
        for name, text in files.items():
            with open(os.path.join(stage, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for name in files:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def run_backtest(run_config):
    tables = [load_csv(p) for p in run_config.data]
    prices = align(*tables)
    return bt.run(run_config.backtest, prices)


def _component(exc):
    """Module of this package where the exception was raised."""
    tb, name = exc.__traceback__, None
    while tb is not None:
        mod = inspect.getmodule(tb.tb_frame)
        if mod is not None and mod.__name__.startswith(__package__ + "."):
            name = mod.__name__.rsplit(".", 1)[-1]
        tb = tb.tb_next
    return name or "cli"


def _fail(exc, code=None):
    print(f"error [{_component(exc)}]: {exc}", file=sys.stderr)
    if code is not None:
        return code
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    return 1


def cmd_backtest(config_path, out_dir):
    try:
        run_config = load_run_config(config_path, out_dir)
    except MarketAdaptiveError as exc:
        return _fail(exc, EXIT_CONFIG)
    try:
        report = run_backtest(run_config)
    except MarketAdaptiveError as exc:
        return _fail(exc)
    _publish(report_files(report), out_dir)
    print(metrics_csv(report), end="")
    return EXIT_OK


def ratio_grid(alpha, risk_free, regimes, sigma_min, sigma_max, steps):
    """Rows of (sigma, sharpe, m per regime) along the family ``mu - rf = sigma``."""
    if not (math.isfinite(sigma_min) and math.isfinite(sigma_max) and 0 < sigma_min < sigma_max):
        raise ConfigError(f"need 0 < sigma-min < sigma-max, got {sigma_min}, {sigma_max}")
    if int(steps) != steps or steps < 2:
        raise ConfigError(f"steps must be an integer >= 2, got {steps}")
    if not regimes:
        raise ConfigError("at least one regime return is required")
    try:
        rhos = [rho(r, alpha) for r in regimes]
    except MarketAdaptiveError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for sigma in np.linspace(sigma_min, sigma_max, int(steps)):
        sigma = float(sigma)
        mu = risk_free + sigma
        rows.append([sigma, sharpe(mu, risk_free, sigma)]
                    + [market_adaptive_ratio(mu, risk_free, sigma, p) for p in rhos])
    return rows


def ratio_grid_csv(alpha, risk_free, regimes, sigma_min, sigma_max, steps):
    rows = ratio_grid(alpha, risk_free, regimes, sigma_min, sigma_max, steps)
    header = ["sigma", "sharpe"] + [f"m_{r:g}" for r in regimes]
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_ratio_grid(alpha, risk_free, regimes, sigma_min, sigma_max, steps, out_path):
    try:
        text = ratio_grid_csv(alpha, risk_free, regimes, sigma_min, sigma_max, steps)
    except MarketAdaptiveError as exc:
        return _fail(exc, EXIT_CONFIG)
    atomic_write_text(out_path, text)
    return EXIT_OK


def load_synth_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    try:
        return SynthConfig.from_dict(raw)
    except (MarketAdaptiveError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_synth(config_path, out_path):
    try:
        table = synth_market(load_synth_config(config_path))
    except MarketAdaptiveError as exc:
        return _fail(exc, EXIT_CONFIG)
    atomic_write_text(out_path, dumps_csv(table))
    return EXIT_OK


def cmd_validate(data_path):
    try:
        table = load_csv(data_path)
    except FileNotFoundError:
        print(f"error [data]: file not found: {data_path}", file=sys.stderr)
        return EXIT_DATA
    except MarketAdaptiveError as exc:
        return _fail(exc, EXIT_DATA)
    print(f"rows: {len(table)}")
    print(f"assets: {len(table.assets)} ({', '.join(table.assets)})")
    print(f"dates: {table.dates[0]} .. {table.dates[-1]}")
    return EXIT_OK


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="marketadaptive", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("backtest", help="run a backtest from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ratio-grid", help="Sharpe vs Market-adaptive Ratio along mu - rf = sigma")
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--rf", type=float, default=0.0)
    p.add_argument("--regimes", type=_float_list, required=True)
    p.add_argument("--sigma-min", type=float, default=1.0)
    p.add_argument("--sigma-max", type=float, default=8.0)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a synthetic regime-switching price file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="check a price CSV")
    p.add_argument("path")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    if args.command == "backtest":
        return cmd_backtest(args.config, args.out)
    if args.command == "ratio-grid":
        return cmd_ratio_grid(args.alpha, args.rf, args.regimes, args.sigma_min,
                              args.sigma_max, args.steps, args.out)
    if args.command == "synth":
        return cmd_synth(args.config, args.out)
    return cmd_validate(args.path)


if __name__ == "__main__":
    sys.exit(main())
