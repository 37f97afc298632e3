"""Tick quotes, price series, returns and chronological data splits."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .errors import ParameterError, ParseError, ValidationError, ZeroPriceError


@dataclass(frozen=True)
class TickQuote:
    """One bid/ask quote. ``timestamp`` is milliseconds since the epoch."""

    timestamp: int
    bid: float
    ask: float

    def __post_init__(self):
        if not (self.bid > 0 and self.ask > 0):
            raise ValidationError(f"prices must be positive, got bid={self.bid} ask={self.ask}")
        if self.ask < self.bid:
            raise ValidationError(f"ask {self.ask} < bid {self.bid}")

    @property
    def mid(self) -> float:
        return mid_price(self)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TickSeries:
    """Column-oriented stream of quotes; position in the stream is the tick index."""

    timestamps: np.ndarray
    bid: np.ndarray
    ask: np.ndarray

    def __post_init__(self):
        ts = _frozen_array(self.timestamps, np.int64).reshape(-1)
        bid = _frozen_array(self.bid, np.float64).reshape(-1)
        ask = _frozen_array(self.ask, np.float64).reshape(-1)
        if not (len(ts) == len(bid) == len(ask)):
            raise ValidationError("timestamps, bid and ask must have equal length")
        if len(ts):
            if not (np.all(np.isfinite(bid)) and np.all(np.isfinite(ask))):
                raise ValidationError("non-finite price in tick series")
            if np.any(bid <= 0):
                raise ValidationError(f"non-positive bid at index {int(np.argmax(bid <= 0))}")
            bad = ask < bid
            if np.any(bad):
                raise ValidationError(f"ask < bid at index {int(np.argmax(bad))}")
            back = np.diff(ts) < 0
            if np.any(back):
                raise ValidationError(f"timestamps decrease at index {int(np.argmax(back)) + 1}")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "bid", bid)
        object.__setattr__(self, "ask", ask)

    @classmethod
    def from_quotes(cls, quotes) -> TickSeries:
        quotes = list(quotes)
        return cls(
            [q.timestamp for q in quotes], [q.bid for q in quotes], [q.ask for q in quotes]
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> TickQuote:
        return TickQuote(int(self.timestamps[i]), float(self.bid[i]), float(self.ask[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def mid(self) -> np.ndarray:
        return (self.ask + self.bid) / 2.0

    @property
    def spread(self) -> np.ndarray:
        return self.ask - self.bid

    def slice(self, start: int, stop: int) -> TickSeries:
        return TickSeries(self.timestamps[start:stop], self.bid[start:stop], self.ask[start:stop])

    @classmethod
    def from_mid(cls, mid, spreads=0.0, timestamps=None, tick_ms: int = 1000) -> TickSeries:
        """Build quotes symmetric around ``mid`` with full width ``spreads``."""
        mid = np.asarray(mid, dtype=float)
        half = np.broadcast_to(np.asarray(spreads, dtype=float), mid.shape) / 2.0
        if timestamps is None:
            timestamps = np.arange(len(mid), dtype=np.int64) * tick_ms
        return cls(timestamps, mid - half, mid + half)


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Ordered prices; element k sits at tick index ``origin_index + k``."""

    values: np.ndarray
    origin_index: int = 0

    def __post_init__(self):
        vals = _frozen_array(self.values, np.float64).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("price series contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin_index", int(self.origin_index))

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __getitem__(self, i):
        return self.values[i]

    @property
    def index(self) -> np.ndarray:
        return self.origin_index + np.arange(len(self.values))

    def __repr__(self) -> str:
        return f"PriceSeries(n={len(self)}, origin_index={self.origin_index})"


@dataclass(frozen=True)
class DataSplit:
    train: PriceSeries
    eval: PriceSeries
    valid: PriceSeries

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.eval), len(self.valid)


def _origin(s) -> int:
    return s.origin_index if isinstance(s, PriceSeries) else 0


def as_prices(s) -> np.ndarray:
    """Float view of a PriceSeries or any 1-d array-like."""
    return np.asarray(s, dtype=float).reshape(-1)


def mid_price(t: TickQuote) -> float:
    return (t.ask + t.bid) / 2.0


def returns(s, h: int = 1) -> PriceSeries:
    """Lagged returns ``(p[i+h] - p[i]) / p[i+h]``, one per index i."""
    if h < 1:
        raise ParameterError(f"lag must be a positive integer, got {h}")
    p = as_prices(s)
    if len(p) <= h:
        raise ParameterError(f"series of length {len(p)} too short for lag {h}")
    ahead = p[h:]
    zero = ahead == 0
    if np.any(zero):
        raise ZeroPriceError(int(np.argmax(zero)) + h)
    return PriceSeries((ahead - p[:-h]) / ahead, _origin(s))


def split_counts(s, n_train: int, n_eval: int) -> DataSplit:
    p = as_prices(s)
    n = len(p)
    if n_train < 0 or n_eval < 0 or n_train + n_eval > n:
        raise ParameterError(f"cannot split {n} samples into {n_train}+{n_eval}+rest")
    o = _origin(s)
    a, b = n_train, n_train + n_eval
    return DataSplit(PriceSeries(p[:a], o), PriceSeries(p[a:b], o + a), PriceSeries(p[b:], o + b))


def split(s, f_train: float, f_eval: float) -> DataSplit:
    """Chronological train/eval/valid split with floor-rounded leading parts."""
    if not (0 <= f_train <= 1 and 0 <= f_eval <= 1) or f_train + f_eval > 1:
        raise ParameterError(f"bad split fractions ({f_train}, {f_eval})")
    n = len(as_prices(s))
    return split_counts(s, math.floor(f_train * n), math.floor(f_eval * n))


def gen_sinusoid(n: int = 51, amplitude: float = 1.0, offset: float = 0.0, phase: float = 0.0) -> PriceSeries:
    """One full period sampled at ``n`` points, both endpoints included."""
    if n < 2:
        raise ParameterError("need at least two samples")
    k = np.arange(n)
    return PriceSeries(offset + amplitude * np.sin(2 * np.pi * k / (n - 1) + phase))


def gen_random_walk_ticks(
    n: int,
    seed: int = 0,
    start: float = 1.3,
    volatility: float = 1e-4,
    spread: float = 2e-4,
    tick_ms: int = 1000,
    start_ms: int = 1_262_304_000_000,
) -> TickSeries:
    """Synthetic EUR/USD-like quote stream: geometric random walk mid, constant spread."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, volatility, size=n)
    steps[0] = 0.0
    mid = start * np.exp(np.cumsum(steps))
    ts = start_ms + np.arange(n, dtype=np.int64) * tick_ms
    return TickSeries.from_mid(mid, spread, ts)


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def parse_ticks(text: str) -> TickSeries:
    """Parse ``timestamp_ms,bid,ask`` records; a non-numeric first line is a header."""
    ts, bids, asks = [], [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not f.strip() for f in row):
            continue
        if lineno == 1 and not _is_number(row[0].strip()):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            t = int(row[0].strip())
            b = float(row[1])
            a = float(row[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not (math.isfinite(b) and math.isfinite(a)) or b <= 0:
            raise ValidationError(f"line {lineno}: prices must be positive and finite")
        if a < b:
            raise ValidationError(f"line {lineno}: ask {a} < bid {b}")
        ts.append(t)
        bids.append(b)
        asks.append(a)
    return TickSeries(ts, bids, asks)


def read_ticks(path: str | PathLike) -> TickSeries:
    with open(path, newline="") as fh:
        return parse_ticks(fh.read())


def write_ticks(path: str | PathLike, ticks: TickSeries) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("timestamp_ms,bid,ask\n")
        for t, b, a in zip(ticks.timestamps, ticks.bid, ticks.ask):
            fh.write(f"{int(t)},{float(b)!r},{float(a)!r}\n")


def parse_series(text: str) -> PriceSeries:
    """Parse ``index,price`` records. Indices must be consecutive."""
    idx, vals = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not f.strip() for f in row):
            continue
        if lineno == 1 and not _is_number(row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
        try:
            idx.append(int(row[0].strip()))
            vals.append(float(row[1]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if idx and np.any(np.diff(idx) != 1):
        raise ParseError("series indices must be consecutive")
    return PriceSeries(vals, idx[0] if idx else 0)


def read_series(path: str | PathLike) -> PriceSeries:
    with open(path, newline="") as fh:
        return parse_series(fh.read())


def write_series(path: str | PathLike, s, header: tuple[str, str] = ("index", "price")) -> None:
    p = as_prices(s)
    o = _origin(s)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k, v in enumerate(p):
            fh.write(f"{o + k},{float(v)!r}\n")
