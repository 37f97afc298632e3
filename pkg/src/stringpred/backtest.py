"""Tick-by-tick execution of directional signals against bid/ask quotes.

Longs buy at the ask and sell at the bid, shorts the reverse, so every round
trip pays the spread.  A signal on tick ``i`` executes on tick ``i``.  Each
tick first closes positions (holding period reached, or a signal in the
opposite direction), then opens at most one new position if the position
and hourly caps allow it.  Positions still open at the last tick are closed
there.
"""
from __future__ import annotations

import datetime as dt
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ParameterError, UndefinedStatisticError
from .marketdata import TickSeries
from .metrics import sharpe as sharpe_ratio

logger = logging.getLogger(__name__)

LONG, SHORT, FLAT = 1, -1, 0
DIRECTION_NAMES = {LONG: "long", SHORT: "short", FLAT: "none"}
DIRECTION_CODES = {v: k for k, v in DIRECTION_NAMES.items()}
HOUR_MS = 3_600_000


@dataclass(frozen=True)
class BacktestConfig:
    initial_equity: float = 10_000.0
    leverage: float = 1.0
    position_fraction: float = 0.1
    max_positions: int = 10
    hourly_cap: int = 10
    commission: float = 0.0
    horizon: int | None = None
    units: float | None = None  # fixed base size per trade; overrides position_fraction
    benchmark_return: float = 0.0  # per-trade, relative to initial equity
    stop_on_ruin: bool = True

    def __post_init__(self):
        if not self.initial_equity > 0:
            raise ParameterError("initial equity must be positive")
        if not self.leverage > 0:
            raise ParameterError("leverage must be positive")
        if not 0 < self.position_fraction <= 1:
            raise ParameterError("position_fraction must lie in (0, 1]")
        if self.max_positions < 1 or self.hourly_cap < 1:
            raise ParameterError("position and hourly caps must be at least 1")
        if self.horizon is not None and self.horizon < 1:
            raise ParameterError("horizon must be positive")
        if self.commission < 0:
            raise ParameterError("commission must be non-negative")
        if self.units is not None and not self.units > 0:
            raise ParameterError("units must be positive")


@dataclass(frozen=True)
class Trade:
    direction: str
    open_index: int
    close_index: int
    open_price: float
    close_price: float
    units: float
    pnl: float
    commission: float = 0.0
    open_time: int = 0
    close_time: int = 0
    exit_reason: str = ""

    @property
    def net(self) -> float:
        return self.pnl - self.commission


@dataclass
class BacktestReport:
    trades: list[Trade]
    equity_by_trade: np.ndarray
    equity_by_day: list[tuple[dt.date, float]]
    initial_equity: float
    final_equity: float
    final_profit_pct: float
    max_drawdown_pct: float
    sharpe: float
    leverage: float
    ruined: bool = False
    diagnostics: list[str] = field(default_factory=list)

    @property
    def trade_count(self) -> int:
        return len(self.trades)

    def summary(self) -> dict:
        return {
            "trade_count": self.trade_count,
            "initial_equity": self.initial_equity,
            "final_equity": self.final_equity,
            "final_profit_pct": self.final_profit_pct,
            "max_drawdown_pct": self.max_drawdown_pct,
            "sharpe": None if math.isnan(self.sharpe) else self.sharpe,
            "leverage": self.leverage,
            "ruined": self.ruined,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class _Position:
    direction: int
    open_index: int
    open_price: float
    units: float
    open_time: int


def _signal_array(signals, n: int) -> np.ndarray:
    """Accept a per-tick direction array or an iterable of objects with ``index``/``direction``."""
    if isinstance(signals, np.ndarray) or (
        isinstance(signals, (list, tuple)) and signals and not hasattr(signals[0], "index")
    ):
        arr = np.asarray(signals)
        if arr.ndim != 1 or len(arr) != n:
            raise AlignmentError(f"signal array of length {arr.shape} for {n} ticks")
        if arr.dtype.kind in "US":
            arr = np.array([DIRECTION_CODES[str(v)] for v in arr])
        return np.sign(arr).astype(np.int8)
    out = np.zeros(n, dtype=np.int8)
    for sig in signals or ():
        i = int(sig.index)
        if not 0 <= i < n:
            raise AlignmentError(f"signal at tick {i} outside [0, {n - 1}]")
        d = sig.direction
        out[i] = DIRECTION_CODES[d] if isinstance(d, str) else int(np.sign(d))
    return out


def run_backtest(ticks: TickSeries, signals, cfg: BacktestConfig = BacktestConfig()) -> BacktestReport:
    n = len(ticks)
    sig = _signal_array(signals, n)
    bid, ask, ts = ticks.bid, ticks.ask, ticks.timestamps

    open_pos: list[_Position] = []
    opened_times: deque[int] = deque()
    trades: list[Trade] = []
    equity = cfg.initial_equity
    curve = [equity]
    diagnostics: list[str] = []
    ruined = False

    def close(pos: _Position, i: int, reason: str) -> None:
        nonlocal equity
        if pos.direction == LONG:
            price = float(bid[i])
            pnl = pos.units * (price - pos.open_price)
        else:
            price = float(ask[i])
            pnl = pos.units * (pos.open_price - price)
        trades.append(Trade(
            DIRECTION_NAMES[pos.direction], pos.open_index, i, pos.open_price, price,
            pos.units, pnl, cfg.commission, pos.open_time, int(ts[i]), reason,
        ))
        equity += pnl - cfg.commission
        curve.append(equity)

    for i in range(n):
        d = int(sig[i])
        still_open = []
        for pos in open_pos:
            if cfg.horizon is not None and i - pos.open_index >= cfg.horizon:
                close(pos, i, "horizon")
            elif d == -pos.direction:
                close(pos, i, "signal")
            else:
                still_open.append(pos)
        open_pos = still_open

        if cfg.stop_on_ruin and equity <= 0:
            for pos in open_pos:
                close(pos, i, "ruin")
            open_pos = []
            ruined = True
            diagnostics.append(f"equity {equity:.6g} <= 0 at tick {i}; run aborted")
            logger.warning(diagnostics[-1])
            break

        if d == FLAT or i == n - 1 or len(open_pos) >= cfg.max_positions:
            continue
        now = int(ts[i])
        while opened_times and now - opened_times[0] >= HOUR_MS:
            opened_times.popleft()
        if len(opened_times) >= cfg.hourly_cap:
            continue
        price = float(ask[i] if d == LONG else bid[i])
        base = cfg.units if cfg.units is not None else cfg.position_fraction * cfg.initial_equity / price
        open_pos.append(_Position(d, i, price, base * cfg.leverage, now))
        opened_times.append(now)

    for pos in open_pos:
        close(pos, n - 1, "end")

    curve_arr = np.asarray(curve)
    rets = np.array([t.net for t in trades]) / cfg.initial_equity
    try:
        s = sharpe_ratio(rets, cfg.benchmark_return)
    except UndefinedStatisticError:
        s = math.nan
    return BacktestReport(
        trades=trades,
        equity_by_trade=curve_arr,
        equity_by_day=_daily_equity(ticks, trades, cfg.initial_equity),
        initial_equity=cfg.initial_equity,
        final_equity=float(curve_arr[-1]),
        final_profit_pct=float(100.0 * (curve_arr[-1] - cfg.initial_equity) / cfg.initial_equity),
        max_drawdown_pct=100.0 * max_drawdown(curve_arr),
        sharpe=s,
        leverage=cfg.leverage,
        ruined=ruined,
        diagnostics=diagnostics,
    )


def _utc_day(ms: int) -> dt.date:
    return dt.datetime.fromtimestamp(ms / 1000.0, tz=dt.timezone.utc).date()


def _daily_equity(ticks: TickSeries, trades: list[Trade], initial: float) -> list[tuple[dt.date, float]]:
    if len(ticks) == 0:
        return []
    first, last = _utc_day(int(ticks.timestamps[0])), _utc_day(int(ticks.timestamps[-1]))
    change: dict[dt.date, float] = {}
    for t in trades:
        day = _utc_day(t.close_time)
        change[day] = change.get(day, 0.0) + t.net
    out = []
    equity = initial
    day = first
    while day <= last:
        equity += change.get(day, 0.0)
        out.append((day, equity))
        day += dt.timedelta(days=1)
    return out


def max_drawdown(equity) -> float:
    """Largest peak-to-trough fall as a fraction of the running peak."""
    e = np.asarray(equity, dtype=float)
    if len(e) == 0:
        raise ParameterError("empty equity curve")
    peak = np.maximum.accumulate(e)
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(peak > 0, (peak - e) / peak, 0.0)
    return float(max(dd.max(), 0.0))


def equity_curves(report: BacktestReport) -> tuple[np.ndarray, list[tuple[dt.date, float]]]:
    """Per-trade curve (initial equity first, then one point per closed trade) and per-day curve."""
    return report.equity_by_trade, report.equity_by_day


@dataclass(frozen=True)
class LeverageComparison:
    leverage_ratio: float
    pnl_ratios: np.ndarray
    profit_ratio: float
    drawdown_ratio: float

    def is_linear(self, rtol: float = 1e-12) -> bool:
        r = self.leverage_ratio
        checks = list(self.pnl_ratios) + [self.profit_ratio, self.drawdown_ratio]
        return all(math.isclose(c, r, rel_tol=rtol) for c in checks if not math.isnan(c))


def leverage_scaling_check(low: BacktestReport, high: BacktestReport) -> LeverageComparison:
    """Compare two runs that differ only in leverage."""
    if low.trade_count != high.trade_count:
        raise ParameterError("runs executed different numbers of trades")
    for a, b in zip(low.trades, high.trades):
        if (a.open_index, a.close_index, a.direction) != (b.open_index, b.close_index, b.direction):
            raise ParameterError("runs executed different trades")
    lo = np.array([t.pnl for t in low.trades])
    hi = np.array([t.pnl for t in high.trades])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(lo != 0, hi / lo, np.nan)

    def ratio(a: float, b: float) -> float:
        return b / a if a != 0 else math.nan

    return LeverageComparison(
        leverage_ratio=high.leverage / low.leverage,
        pnl_ratios=ratios,
        profit_ratio=ratio(low.final_profit_pct, high.final_profit_pct),
        drawdown_ratio=ratio(low.max_drawdown_pct, high.max_drawdown_pct),
    )


def write_trades(path, report: BacktestReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("open_idx,close_idx,dir,open_px,close_px,units,pnl\n")
        for t in report.trades:
            fh.write(f"{t.open_index},{t.close_index},{t.direction},{float(t.open_price)!r},"
                     f"{float(t.close_price)!r},{float(t.units)!r},{float(t.pnl)!r}\n")


def write_equity(path_trade, path_day, report: BacktestReport) -> None:
    with open(path_trade, "w", newline="") as fh:
        fh.write("trade,equity\n")
        for k, e in enumerate(report.equity_by_trade):
            fh.write(f"{k},{float(e)!r}\n")
    with open(path_day, "w", newline="") as fh:
        fh.write("day,equity\n")
        for day, e in report.equity_by_day:
            fh.write(f"{day.isoformat()},{float(e)!r}\n")
