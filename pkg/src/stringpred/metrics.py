"""Forecast and trading statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MetricError, ParameterError, UndefinedStatisticError
from .marketdata import as_prices


@dataclass(frozen=True)
class ErrorReport:
    mae: float
    smape: float
    n: int

    def to_dict(self) -> dict:
        return {"mae": self.mae, "smape": self.smape, "n": self.n}


def _pair(actual, forecast) -> tuple[np.ndarray, np.ndarray]:
    a = as_prices(actual)
    f = as_prices(forecast)
    if len(a) != len(f):
        raise ParameterError(f"length mismatch: {len(a)} actuals vs {len(f)} forecasts")
    if len(a) == 0:
        raise ParameterError("need at least one sample")
    return a, f


def mae(actual, forecast) -> float:
    a, f = _pair(actual, forecast)
    return float(np.mean(np.abs(a - f)))


def smape(actual, forecast) -> float:
    """Symmetric MAPE in percent, range [0, 200]."""
    a, f = _pair(actual, forecast)
    denom = 0.5 * (np.abs(a) + np.abs(f))
    zero = denom == 0
    if np.any(zero):
        k = int(np.argmax(zero))
        raise MetricError(f"actual and forecast both zero at index {k}", index=k)
    return float(100.0 * np.mean(np.abs(a - f) / denom))


def error_report(actual, forecast) -> ErrorReport:
    a, f = _pair(actual, forecast)
    return ErrorReport(mae(a, f), smape(a, f), len(a))


def naive_forecast(s, l_pr: int = 1) -> np.ndarray:
    """Persistence forecasts ``F_t = A_{t-l_pr}``, aligned with ``s[l_pr:]``."""
    p = as_prices(s)
    if l_pr < 1 or len(p) <= l_pr:
        raise ParameterError(f"need more than {l_pr} samples for horizon {l_pr}")
    return p[:-l_pr].copy()


def direction_hit_rate(actual, forecast, reference) -> float:
    """Share of forecasts that call the sign of ``actual - reference`` correctly.

    Cases where the actual price did not move count as misses unless the
    forecast also predicts no move.
    """
    a, f = _pair(actual, forecast)
    r = as_prices(reference)
    return float(np.mean(np.sign(f - r) == np.sign(a - r)))


def exact_hit_rate(actual, forecast, tol: float = 0.0) -> float:
    a, f = _pair(actual, forecast)
    return float(np.mean(np.abs(a - f) <= tol))


def _roundoff(x: np.ndarray) -> float:
    """Spread below which a sample is indistinguishable from constant."""
    return 16 * np.finfo(float).eps * float(np.max(np.abs(x)))


def sharpe(trade_returns, benchmark_return: float = 0.0) -> float:
    """Mean excess return over its population standard deviation."""
    r = as_prices(trade_returns)
    if len(r) < 2:
        raise UndefinedStatisticError("Sharpe ratio needs at least two returns")
    excess = r - benchmark_return
    sd = excess.std()
    if not sd > _roundoff(excess):
        raise UndefinedStatisticError("zero variance of excess returns")
    return float(excess.mean() / sd)


def skewness(samples) -> float:
    x = as_prices(samples)
    if len(x) < 3:
        raise UndefinedStatisticError("skewness needs at least three samples")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not math.sqrt(m2) > _roundoff(x):
        raise UndefinedStatisticError("zero variance")
    return float(np.mean(d**3) / m2**1.5)


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if len(counts) != len(edges) - 1:
            raise ParameterError("need len(counts) == len(edges) - 1")
        if np.any(counts < 0):
            raise ParameterError("negative bin count")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bins(self) -> int:
        return len(self.counts)

    def frequencies(self, pseudo_count: float = 0.0) -> np.ndarray:
        c = self.counts + pseudo_count
        return c / c.sum()


def unit_edges(bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, bins + 1)


def bin_index(values, edges) -> np.ndarray:
    """Bin of each value; the last bin is closed on the right, outliers are clipped."""
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def histogram(values, edges) -> Histogram:
    edges = np.asarray(edges, dtype=float)
    v = np.asarray(values, dtype=float).reshape(-1)
    counts = np.bincount(bin_index(v, edges), minlength=len(edges) - 1) if len(v) else np.zeros(len(edges) - 1)
    return Histogram(edges, counts)


def kl_divergence_probs(p, q) -> float:
    """KL divergence (natural log) between two normalized frequency vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ParameterError("frequency vectors differ in length")
    mask = p > 0
    if np.any(q[mask] <= 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(p: Histogram, q: Histogram, pseudo_count: float = 1.0) -> float:
    """KL divergence of histogram ``p`` from ``q`` after additive smoothing."""
    if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
        raise ParameterError("histograms have different bin edges")
    if pseudo_count <= 0 and (p.total == 0 or q.total == 0):
        raise ParameterError("empty histogram")
    return kl_divergence_probs(p.frequencies(pseudo_count), q.frequencies(pseudo_count))
