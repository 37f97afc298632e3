"""Momentum of a price window against a closed-string template, and trading on it.

The momentum ``M`` of the ``ls + 1`` prices ending at tick ``tau`` is the
Q-mean distance between the min-max standardized window and the template
``(1 + cos(2 pi m h / (ls + 1) + phi)) / 2``.  Learning collects, for every
site, ``M`` and the outcome of a hypothetical long and short trade held for
``horizon`` ticks at real bid/ask prices.  A direction is tradable when the
profit and loss distributions of ``M`` differ enough (KL divergence) and the
learning trades pass skewness/Sharpe filters; individual bins qualify by
their profit/loss odds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .backtest import FLAT, LONG, SHORT, BacktestConfig, DIRECTION_NAMES, run_backtest
from .errors import BoundsError, DegenerateWindowError, ParameterError, UndefinedStatisticError
from .marketdata import PriceSeries, TickSeries, as_prices
from .metrics import Histogram, bin_index, histogram, kl_divergence, sharpe, skewness, unit_edges


def cosine_template(ls: int, m: int, phi: float) -> np.ndarray:
    h = np.arange(ls + 1)
    return 0.5 * (1.0 + np.cos(2 * np.pi * m * h / (ls + 1) + phi))


TEMPLATES = {"cosine": cosine_template}


@dataclass(frozen=True)
class PmbcsParams:
    ls: int = 100
    m: int = 1
    Q: float = 1.0
    phi: float = 0.0
    bins: int = 50
    D_threshold: float = 0.0
    rho_min: float = 1.0
    skew_min: float = -math.inf
    sharpe_min: float = -math.inf
    max_positions: int = 10
    hourly_cap: int = 10
    horizon: int = 1000
    min_occupancy: int = 20
    template: str = "cosine"
    benchmark_return: float = 0.0

    def __post_init__(self):
        for name in ("ls", "m", "bins", "max_positions", "hourly_cap", "horizon", "min_occupancy"):
            v = getattr(self, name)
            if int(v) != v:
                raise ParameterError(f"{name} must be an integer, got {v}")
            object.__setattr__(self, name, int(v))
        if self.ls < 2 or self.bins < 2 or self.max_positions < 1:
            raise ParameterError("need ls >= 2, bins >= 2, max_positions >= 1")
        if self.m < 1 or self.horizon < 1 or self.hourly_cap < 1 or self.min_occupancy < 0:
            raise ParameterError("m, horizon and hourly_cap must be positive")
        if not self.Q > 0:
            raise ParameterError("Q must be positive")
        if self.template not in TEMPLATES:
            raise ParameterError(f"unknown template {self.template!r}")

    def template_values(self) -> np.ndarray:
        return TEMPLATES[self.template](self.ls, self.m, self.phi)


def _qmean(d: np.ndarray, Q: float) -> np.ndarray:
    return np.mean(d**Q, axis=-1) ** (1.0 / Q)


def momentum(window, p: PmbcsParams) -> float:
    w = as_prices(window)
    if len(w) != p.ls + 1:
        raise ParameterError(f"window must hold ls + 1 = {p.ls + 1} prices, got {len(w)}")
    lo, hi = w.min(), w.max()
    if hi == lo:
        raise DegenerateWindowError("constant window")
    d = np.abs((w - lo) / (hi - lo) - p.template_values())
    return float(_qmean(d, p.Q))


def momentum_series(prices, p: PmbcsParams, chunk: int = 1 << 21) -> np.ndarray:
    """``M`` for the window ending at every tick; NaN before ``ls`` and on flat windows."""
    x = as_prices(prices)
    n = len(x)
    out = np.full(n, np.nan)
    if n < p.ls + 1:
        return out
    views = np.lib.stride_tricks.sliding_window_view(x, p.ls + 1)
    tmpl = p.template_values()
    step = max(1, chunk // (p.ls + 1))
    for a in range(0, len(views), step):
        v = views[a:a + step]
        lo = v.min(axis=1, keepdims=True)
        span = v.max(axis=1, keepdims=True) - lo
        flat = span[:, 0] == 0
        span[flat] = 1.0
        d = np.abs((v - lo) / span - tmpl)
        m = _qmean(d, p.Q)
        m[flat] = np.nan
        out[p.ls + a:p.ls + a + len(v)] = m
    return out


@dataclass(frozen=True, eq=False)
class MomentumStats:
    long_profit: Histogram
    long_loss: Histogram
    short_profit: Histogram
    short_loss: Histogram
    sites: np.ndarray
    momenta: np.ndarray
    long_returns: np.ndarray
    short_returns: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return self.long_profit.edges

    def histograms(self, direction: str) -> tuple[Histogram, Histogram]:
        if direction == "long":
            return self.long_profit, self.long_loss
        if direction == "short":
            return self.short_profit, self.short_loss
        raise ParameterError(f"direction must be 'long' or 'short', got {direction!r}")

    def realized_returns(self, direction: str, bins=None) -> np.ndarray:
        """Learning-trade returns of ``direction``, optionally only for sites in ``bins``."""
        r = self.long_returns if direction == "long" else self.short_returns
        if bins is None:
            return r
        sel = np.isin(bin_index(self.momenta, self.edges), list(bins))
        return r[sel]


def trade_returns(mid, spreads, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Relative returns of a long and a short opened at each tick and closed ``horizon`` later.

    Entries beyond ``len - horizon`` are NaN.
    """
    x = as_prices(mid)
    half = np.broadcast_to(np.asarray(spreads, dtype=float), x.shape) / 2.0
    ask, bid = x + half, x - half
    n = len(x)
    lr = np.full(n, np.nan)
    sr = np.full(n, np.nan)
    if n > horizon:
        lr[:n - horizon] = (bid[horizon:] - ask[:n - horizon]) / ask[:n - horizon]
        sr[:n - horizon] = (bid[:n - horizon] - ask[horizon:]) / bid[:n - horizon]
    return lr, sr


def accumulate_stats(s, spreads, p: PmbcsParams, momenta: np.ndarray | None = None) -> MomentumStats:
    """Learn profit/loss histograms of ``M`` for both directions.

    A site is every tick with a full window behind it and ``horizon`` ticks
    ahead.  A trade with zero or negative net return counts as a loss.
    """
    x = as_prices(s)
    n = len(x)
    if n < p.ls + 1 + p.horizon:
        raise BoundsError(f"need at least ls + 1 + horizon = {p.ls + 1 + p.horizon} ticks, got {n}")
    M = momentum_series(x, p) if momenta is None else momenta
    lr, sr = trade_returns(x, spreads, p.horizon)
    sites = np.arange(p.ls, n - p.horizon)
    sites = sites[np.isfinite(M[sites])]
    m, lr, sr = M[sites], lr[sites], sr[sites]
    edges = unit_edges(p.bins)
    return MomentumStats(
        long_profit=histogram(m[lr > 0], edges),
        long_loss=histogram(m[~(lr > 0)], edges),
        short_profit=histogram(m[sr > 0], edges),
        short_loss=histogram(m[~(sr > 0)], edges),
        sites=sites,
        momenta=m,
        long_returns=lr,
        short_returns=sr,
    )


def good_bins(stats: MomentumStats, direction: str, p: PmbcsParams) -> frozenset[int]:
    """Bins with smoothed profit/loss odds >= ``rho_min`` and at least ``min_occupancy`` samples."""
    prof, loss = stats.histograms(direction)
    ratio = prof.frequencies(1.0) / loss.frequencies(1.0)
    occupied = (prof.counts + loss.counts) >= p.min_occupancy
    return frozenset(int(j) for j in np.flatnonzero((ratio >= p.rho_min) & occupied))


@dataclass(frozen=True)
class GateResult:
    passed: bool
    dkl: float
    skew: float = math.nan
    sharpe: float = math.nan
    reason: str = ""


def opportunity_gate(stats: MomentumStats, direction: str, p: PmbcsParams) -> GateResult:
    """KL opportunity test plus skewness/Sharpe filters on the learning trades.

    The filters look at the returns of learning trades that fell into the
    direction's good bins.  A filter with threshold ``-inf`` is disabled;
    an enabled filter on an undefined statistic fails the gate.
    """
    prof, loss = stats.histograms(direction)
    dkl = kl_divergence(prof, loss)
    if not dkl > p.D_threshold:
        return GateResult(False, dkl, reason=f"D_KL {dkl:.6g} <= threshold {p.D_threshold:.6g}")
    r = stats.realized_returns(direction, good_bins(stats, direction, p))
    skew = sr = math.nan
    if p.skew_min > -math.inf:
        try:
            skew = skewness(r)
        except UndefinedStatisticError as exc:
            return GateResult(False, dkl, reason=f"skewness undefined: {exc}")
        if skew < p.skew_min:
            return GateResult(False, dkl, skew, reason=f"skewness {skew:.6g} < {p.skew_min:.6g}")
    if p.sharpe_min > -math.inf:
        try:
            sr = sharpe(r, p.benchmark_return)
        except UndefinedStatisticError as exc:
            return GateResult(False, dkl, skew, reason=f"Sharpe undefined: {exc}")
        if sr < p.sharpe_min:
            return GateResult(False, dkl, skew, sr, reason=f"Sharpe {sr:.6g} < {p.sharpe_min:.6g}")
    return GateResult(True, dkl, skew, sr, reason="passed")


@dataclass(frozen=True)
class TradingRules:
    """What learning produced: tradable bins per direction and the gate diagnostics."""

    edges: np.ndarray = field(repr=False)
    long_bins: frozenset[int]
    short_bins: frozenset[int]
    long_gate: GateResult
    short_gate: GateResult

    def lookup(self) -> np.ndarray:
        """Direction code per bin; bins good for both directions map to flat."""
        table = np.zeros(len(self.edges) - 1, dtype=np.int8)
        for j in self.long_bins - self.short_bins:
            table[j] = LONG
        for j in self.short_bins - self.long_bins:
            table[j] = SHORT
        return table


def learn_rules(stats: MomentumStats, p: PmbcsParams) -> TradingRules:
    gates = {}
    bins = {}
    for d in ("long", "short"):
        gates[d] = opportunity_gate(stats, d, p)
        bins[d] = good_bins(stats, d, p) if gates[d].passed else frozenset()
    return TradingRules(stats.edges, bins["long"], bins["short"], gates["long"], gates["short"])


@dataclass(frozen=True)
class Signal:
    index: int
    direction: str
    momentum: float
    bin: int
    reason: dict = field(default_factory=dict)


def generate_signal(window, stats: MomentumStats, p: PmbcsParams, rules: TradingRules | None = None) -> Signal:
    """Signal for the tick that ends ``window``."""
    index = (window.origin_index if isinstance(window, PriceSeries) else 0) + len(window) - 1
    if rules is None:
        rules = learn_rules(stats, p)
    diag = {"dkl_long": rules.long_gate.dkl, "dkl_short": rules.short_gate.dkl}
    try:
        M = momentum(window, p)
    except DegenerateWindowError as exc:
        return Signal(index, "none", math.nan, -1, {**diag, "error": str(exc)})
    j = int(bin_index(M, rules.edges))
    is_long, is_short = j in rules.long_bins, j in rules.short_bins
    if is_long and is_short:
        direction, why = "none", "conflict: bin good for both directions"
    elif is_long:
        direction, why = "long", "good long bin"
    elif is_short:
        direction, why = "short", "good short bin"
    else:
        direction, why = "none", "no good bin"
    return Signal(index, direction, M, j, {**diag, "rule": why})


def signal_series(prices, rules: TradingRules, p: PmbcsParams, start: int = 0, stop: int | None = None,
                  momenta: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized signals on ticks ``[start, stop)``: (direction codes, M, bin)."""
    x = as_prices(prices)
    stop = len(x) if stop is None else stop
    M = momentum_series(x, p) if momenta is None else momenta
    M = M[start:stop]
    ok = np.isfinite(M)
    b = np.full(len(M), -1)
    b[ok] = bin_index(M[ok], rules.edges)
    d = np.zeros(len(M), dtype=np.int8)
    d[ok] = rules.lookup()[b[ok]]
    return d, M, b


def backtest_config(p: PmbcsParams, **overrides) -> BacktestConfig:
    return BacktestConfig(max_positions=p.max_positions, hourly_cap=p.hourly_cap, horizon=p.horizon, **overrides)


def trading_objective(ticks: TickSeries, point: dict, base: PmbcsParams = PmbcsParams(), cfg_overrides=None):
    """In-sample learn-then-trade evaluation of one parameter point.

    Returns Sharpe as the objective and profit/drawdown/trade count as
    auxiliary metrics (for ``sharpe-then-profit`` selection).
    """
    p = replace(base, **point)
    mid, spread = ticks.mid, ticks.spread
    M = momentum_series(mid, p)
    stats = accumulate_stats(mid, spread, p, momenta=M)
    rules = learn_rules(stats, p)
    d, _, _ = signal_series(mid, rules, p, momenta=M)
    rep = run_backtest(ticks, d, backtest_config(p, **(cfg_overrides or {})))
    s = rep.sharpe if rep.trade_count >= 2 else math.nan
    aux = {
        "sharpe": s,
        "profit_pct": rep.final_profit_pct,
        "max_drawdown": rep.max_drawdown_pct / 100.0,
        "trades": rep.trade_count,
    }
    return s, aux


@dataclass(frozen=True)
class EducationStep:
    learn: tuple[int, int]
    trade: tuple[int, int]
    params: PmbcsParams
    objective: float
    aux: dict


def self_educate(s, spreads, grid, schedule=(100_000, 20_000), base: PmbcsParams = PmbcsParams(),
                 timestamps=None, workers: int = 1, cfg_overrides=None) -> list[EducationStep]:
    """Rolling re-optimization: pick the best grid point on each learn window.

    Trade window k covers ``[learn_len + k*trade_len, learn_len + (k+1)*trade_len)``
    and its parameters are chosen on the ``learn_len`` ticks just before it,
    ranked by Sharpe and then profit.
    """
    from .optimize import ParameterGrid, grid_search, select_best

    learn_len, trade_len = map(int, schedule)
    x = as_prices(s)
    n = len(x)
    if learn_len < 1 or trade_len < 1:
        raise ParameterError("learn and trade lengths must be positive")
    if n < learn_len + trade_len:
        raise BoundsError(f"need at least {learn_len + trade_len} ticks, got {n}")
    grid = grid if isinstance(grid, ParameterGrid) else ParameterGrid(grid)
    ticks = TickSeries.from_mid(x, spreads, timestamps)

    steps = []
    start = learn_len
    while start + trade_len <= n:
        learn = ticks.slice(start - learn_len, start)
        objective = partial(trading_objective, base=base, cfg_overrides=cfg_overrides)
        results = grid_search(learn, grid, objective, minimize=False, workers=workers)
        best = select_best(results, rule="sharpe-then-profit")
        steps.append(EducationStep(
            (start - learn_len, start), (start, start + trade_len),
            replace(base, **best.params), best.objective, dict(best.aux),
        ))
        start += trade_len
    return steps


@dataclass(frozen=True, eq=False)
class EducationRun:
    steps: list[EducationStep]
    directions: np.ndarray
    momenta: np.ndarray
    bins: np.ndarray
    dkl: np.ndarray


def run_self_education(ticks: TickSeries, grid, schedule=(100_000, 20_000), base: PmbcsParams = PmbcsParams(),
                       workers: int = 1, cfg_overrides=None) -> EducationRun:
    """Signals over all trade windows, each from rules learned on its own learn window."""
    mid, spread = ticks.mid, ticks.spread
    steps = self_educate(mid, spread, grid, schedule, base, ticks.timestamps, workers, cfg_overrides)
    n = len(ticks)
    d = np.zeros(n, dtype=np.int8)
    M = np.full(n, np.nan)
    b = np.full(n, -1)
    dkl = np.full(n, np.nan)
    for st in steps:
        p = st.params
        lo, hi = st.learn
        stats = accumulate_stats(mid[lo:hi], spread[lo:hi], p)
        rules = learn_rules(stats, p)
        t0, t1 = st.trade
        # momentum windows at the start of a trade window reach back into its learn window
        seg = slice(t0 - p.ls, t1)
        dd, mm, bb = signal_series(mid[seg], rules, p, start=p.ls)
        d[t0:t1], M[t0:t1], b[t0:t1] = dd, mm, bb
        dkl[t0:t1] = np.where(dd == LONG, rules.long_gate.dkl, np.where(dd == SHORT, rules.short_gate.dkl, np.nan))
    return EducationRun(steps, d, M, b, dkl)


def write_signals(path, index, momenta, directions, bins, dkl) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("index,M,direction,bin,dkl\n")
        for i, m, d, b, k in zip(index, momenta, directions, bins, dkl):
            fh.write(f"{int(i)},{float(m)!r},{DIRECTION_NAMES[int(d)]},{int(b)},{float(k)!r}\n")
