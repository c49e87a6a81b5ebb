"""Price tables: CSV ingestion, calendar alignment, returns and a synthetic market.

CSV layout (UTF-8, LF line endings, no quoting)::

    date,SPX,BND
    2010-01-04,1132.99,75.11
    2010-01-05,1136.52,75.43

Prices are assumed to be adjusted (total-return) closes.
"""

from dataclasses import dataclass
import io
import math
import os
import tempfile

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    NoOverlapError,
    ParseError,
    ValidationError,
)

TRADING_DAYS = 252


@dataclass(frozen=True, eq=False)
class PriceTable:
    """Date-aligned adjusted close prices, one column per asset."""

    dates: np.ndarray  # datetime64[D], strictly increasing
    assets: tuple
    prices: np.ndarray  # shape (n_dates, n_assets)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "assets", tuple(self.assets))
        if prices.ndim != 2 or prices.shape != (dates.size, len(self.assets)):
            raise ValidationError(
                f"price matrix shape {prices.shape} does not match "
                f"{dates.size} dates x {len(self.assets)} assets")
        if len(set(self.assets)) != len(self.assets):
            raise ValidationError(f"duplicate asset names: {self.assets}")
        if dates.size > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise ValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValidationError("prices must be positive and finite")

    def __len__(self):
        return self.dates.size

    def __eq__(self, other):
        if not isinstance(other, PriceTable):
            return NotImplemented
        return (self.assets == other.assets
                and np.array_equal(self.dates, other.dates)
                and np.array_equal(self.prices, other.prices))

    def slice_dates(self, start=None, end=None):
        """Rows with ``start <= date <= end`` (either bound optional)."""
        mask = np.ones(self.dates.size, dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return PriceTable(self.dates[mask], self.assets, self.prices[mask])


@dataclass(frozen=True, eq=False)
class ReturnTable:
    """Simple per-period returns; each row is dated at the later price."""

    dates: np.ndarray
    assets: tuple
    returns: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "assets", tuple(self.assets))
        if returns.shape != (dates.size, len(self.assets)):
            raise InvalidInputError(
                f"return matrix shape {returns.shape} does not match "
                f"{dates.size} dates x {len(self.assets)} assets")
        if not np.all(np.isfinite(returns)) or np.any(returns <= -1):
            raise InvalidInputError("returns must be finite and > -1")

    def __len__(self):
        return self.dates.size

    @classmethod
    def from_array(cls, returns, assets=None, start="2000-01-01"):
        """Wrap a bare return matrix with consecutive daily dates."""
        returns = np.asarray(returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        if assets is None:
            assets = tuple(f"A{i}" for i in range(returns.shape[1]))
        dates = np.datetime64(start, "D") + np.arange(returns.shape[0])
        return cls(dates, assets, returns)

    def before(self, date):
        """Rows dated strictly before ``date``."""
        mask = self.dates < np.datetime64(date, "D")
        return ReturnTable(self.dates[mask], self.assets, self.returns[mask])

    def between(self, start, end):
        mask = (self.dates >= np.datetime64(start, "D")) & (self.dates <= np.datetime64(end, "D"))
        return ReturnTable(self.dates[mask], self.assets, self.returns[mask])


def format_decimal(x):
    """Shortest round-tripping positional representation of a float."""
    return np.format_float_positional(float(x), unique=True, trim="0")


def _parse_lines(lines, source):
    if not lines or not lines[0].strip():
        raise ParseError(f"{source}: empty file", line=1)
    header = lines[0].rstrip("\n").split(",")
    if header[0] != "date" or len(header) < 2:
        raise ParseError(f"{source}: header must be 'date,<ASSET>,...'", line=1)
    assets = header[1:]
    if any(not a for a in assets):
        raise ParseError(f"{source}: empty asset name in header", line=1)
    if len(set(assets)) != len(assets):
        raise ParseError(f"{source}: duplicate asset name in header", line=1)

    dates, rows, line_of = [], [], {}
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.rstrip("\n")
        if not text:
            if lineno == len(lines):
                continue
            raise ParseError(f"{source}: blank line", line=lineno)
        cells = text.split(",")
        if len(cells) != len(header):
            raise ParseError(
                f"{source}: expected {len(header)} fields, got {len(cells)}", line=lineno)
        try:
            d = np.datetime64(cells[0], "D")
        except ValueError:
            raise ParseError(f"{source}: bad date {cells[0]!r}", line=lineno) from None
        if len(cells[0]) != 10 or str(d) != cells[0]:
            raise ParseError(f"{source}: date must be YYYY-MM-DD, got {cells[0]!r}", line=lineno)
        try:
            values = [float(c) for c in cells[1:]]
        except ValueError:
            raise ParseError(f"{source}: non-numeric price", line=lineno) from None
        for asset, v in zip(assets, values):
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(
                    f"{source}: price for {asset} on {cells[0]} must be positive, got {v}",
                    line=lineno)
        if d in line_of:
            raise ValidationError(
                f"{source}: duplicate date {cells[0]} (first seen on line {line_of[d]})",
                line=lineno)
        line_of[d] = lineno
        dates.append(d)
        rows.append(values)

    if not rows:
        raise ValidationError(f"{source}: no data rows", line=2)
    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    prices = np.array(rows, dtype=float)[order]
    return PriceTable(dates[order], tuple(assets), prices)


def load_csv(path):
    """Read a price CSV; rows may be in any order and are sorted by date."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if "\r" in text:
        raise ParseError(f"{path}: CR line endings are not allowed")
    return _parse_lines(text.splitlines(keepends=True), path)


def parse_csv(text, source="<string>"):
    return _parse_lines(text.splitlines(keepends=True), source)


def dumps_csv(table):
    buf = io.StringIO(newline="")
    buf.write("date," + ",".join(table.assets) + "\n")
    for d, row in zip(table.dates, table.prices):
        buf.write(str(d) + "," + ",".join(format_decimal(v) for v in row) + "\n")
    return buf.getvalue()


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(table, path):
    atomic_write_text(path, dumps_csv(table))


def align(*tables):
    """Inner-join tables on date; columns keep the input order."""
    if len(tables) == 1 and not isinstance(tables[0], PriceTable):
        tables = tuple(tables[0])
    if not tables:
        raise InvalidInputError("align needs at least one table")
    common = tables[0].dates
    for t in tables[1:]:
        common = np.intersect1d(common, t.dates)
    if common.size == 0:
        raise NoOverlapError("tables share no dates")
    columns, assets = [], []
    for t in tables:
        idx = np.searchsorted(t.dates, common)
        columns.append(t.prices[idx])
        assets.extend(t.assets)
    return PriceTable(common, tuple(assets), np.hstack(columns))


def to_returns(prices):
    if len(prices) < 2:
        raise InsufficientDataError("need at least 2 price rows to form returns")
    p = prices.prices
    return ReturnTable(prices.dates[1:], prices.assets, p[1:] / p[:-1] - 1.0)


@dataclass(frozen=True)
class Regime:
    """One segment of the synthetic market.

    ``annual_drift`` is the expected annualized log return and
    ``annual_vol`` the annualized volatility; each is a scalar shared by all
    assets or a per-asset sequence.
    """

    length_days: int
    annual_drift: object
    annual_vol: object


@dataclass(frozen=True)
class SynthConfig:
    n_days: int
    regimes: tuple
    correlation: float = 0.0
    seed: int = 0
    assets: tuple = ("A", "B")
    start_date: str = "2000-01-03"
    initial_price: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(
            r if isinstance(r, Regime) else Regime(**r) for r in self.regimes))
        object.__setattr__(self, "assets", tuple(self.assets))
        n = len(self.assets)
        if n < 1 or len(set(self.assets)) != n:
            raise ValidationError("assets must be non-empty and unique")
        if not self.regimes:
            raise ValidationError("at least one regime segment is required")
        if any(int(r.length_days) != r.length_days or r.length_days < 1 for r in self.regimes):
            raise ValidationError("regime lengths must be positive integers")
        if sum(r.length_days for r in self.regimes) != self.n_days:
            raise ValidationError(
                f"regime lengths sum to {sum(r.length_days for r in self.regimes)}, "
                f"expected n_days={self.n_days}")
        for r in self.regimes:
            drift = _per_asset(r.annual_drift, n, "annual_drift")
            vol = _per_asset(r.annual_vol, n, "annual_vol")
            if not np.all(np.isfinite(drift)):
                raise ValidationError("drifts must be finite")
            if not np.all(np.isfinite(vol)) or np.any(vol < 0):
                raise ValidationError("vols must be non-negative")
        if not abs(self.correlation) < 1:
            raise ValidationError(f"|correlation| must be < 1, got {self.correlation}")
        if n > 1 and self.correlation <= -1.0 / (n - 1):
            raise ValidationError(
                f"equicorrelation {self.correlation} is not valid for {n} assets")
        if not (math.isfinite(self.initial_price) and self.initial_price > 0):
            raise ValidationError("initial_price must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["regimes"] = tuple(Regime(**r) for r in d.get("regimes", ()))
        if "assets" in d:
            d["assets"] = tuple(d["assets"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad synth config: {exc}") from None


def _per_asset(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ValidationError(f"{name} must be a scalar or have {n} entries")
    return arr


def weekdays(start, n):
    """``n`` consecutive weekdays starting at (or after) ``start``."""
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def synth_market(config):
    """Correlated geometric Brownian motion with piecewise-constant regimes.

    Daily step ``dt = 1/252``; the first row holds ``initial_price`` and each
    of the ``n_days`` following rows advances one step, so the table has
    ``n_days + 1`` rows dated on consecutive weekdays.
    """
    n = len(config.assets)
    dt = 1.0 / TRADING_DAYS
    rng = np.random.default_rng(config.seed)
    corr = np.full((n, n), config.correlation)
    np.fill_diagonal(corr, 1.0)
    chol = np.linalg.cholesky(corr)
    z = rng.standard_normal((config.n_days, n)) @ chol.T

    drift = np.empty((config.n_days, n))
    vol = np.empty((config.n_days, n))
    row = 0
    for r in config.regimes:
        drift[row:row + r.length_days] = _per_asset(r.annual_drift, n, "annual_drift")
        vol[row:row + r.length_days] = _per_asset(r.annual_vol, n, "annual_vol")
        row += r.length_days

    log_steps = drift * dt + vol * math.sqrt(dt) * z
    log_path = np.vstack([np.zeros((1, n)), np.cumsum(log_steps, axis=0)])
    prices = config.initial_price * np.exp(log_path)
    return PriceTable(weekdays(config.start_date, config.n_days + 1), config.assets, prices)


def alternating_regimes(n_segments, length_days, bull_drift, bear_drift, vol,
                        other_drift=0.0, other_vol=None):
    """Bull/bear alternation for the first asset; optional steady second asset.

    Returns a list of :class:`Regime` starting with a bull segment.
    """
    regimes = []
    for k in range(n_segments):
        d = bull_drift if k % 2 == 0 else bear_drift
        if other_vol is None:
            regimes.append(Regime(length_days, d, vol))
        else:
            regimes.append(Regime(length_days, [d, other_drift], [vol, other_vol]))
    return regimes
