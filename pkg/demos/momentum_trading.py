"""
Momentum trading on synthetic ticks
===================================

Learns which momentum values preceded profitable trades on one stretch of a
random-walk quote stream, trades the next stretch with those rules, and
looks at the resulting equity, caps and leverage scaling.

A random walk has no exploitable structure, so expect profits near zero
after spreads; the point is the mechanics.

Run with ``python3 demos/momentum_trading.py``.
"""

# %%
# Quotes: 40,000 one-second ticks with a 2-pip spread.
import numpy as np

from stringpred.backtest import BacktestConfig, leverage_scaling_check, run_backtest
from stringpred.marketdata import gen_random_walk_ticks
from stringpred.pmbcs import (
    PmbcsParams,
    accumulate_stats,
    backtest_config,
    learn_rules,
    momentum_series,
    run_self_education,
    signal_series,
)

ticks = gen_random_walk_ticks(40_000, seed=11)
print(f"{len(ticks)} ticks, mid {ticks.mid.min():.5f} .. {ticks.mid.max():.5f}")

# %%
# Momentum: each window of ls + 1 mids is squeezed onto [0, 1] and compared
# with a cosine template.  0 is a perfect match, values near 1 are far away.
p = PmbcsParams(ls=60, horizon=120, rho_min=1.1, min_occupancy=20)
M = momentum_series(ticks.mid, p)
print(f"momentum over the stream: mean {np.nanmean(M):.3f}, 5%..95% "
      f"{np.nanpercentile(M, 5):.3f}..{np.nanpercentile(M, 95):.3f}")

# %%
# Learning: at every tick, would a long (or short) held for `horizon` ticks
# have made money after the spread?  Histogram the momentum of the winners
# and the losers separately for each direction.
learn = slice(0, 20_000)
stats = accumulate_stats(ticks.mid[learn], ticks.spread[learn], p)
print(f"long trades: {stats.long_profit.total} winners, {stats.long_loss.total} losers")

# %%
# Rules: a direction is tradable only if its winner and loser histograms
# differ (KL divergence above the threshold), and then only in bins where
# winners outnumber losers by rho_min.
rules = learn_rules(stats, p)
for name, gate, bins in (("long", rules.long_gate, rules.long_bins), ("short", rules.short_gate, rules.short_bins)):
    print(f"{name:>5}: D_KL {gate.dkl:.4f}, gate {'open' if gate.passed else 'closed'}, good bins {sorted(bins)}")

# %%
# Trading the next stretch with the learned rules.  The first ls ticks have
# no full window behind them and stay flat.
trade = ticks.slice(20_000, 40_000)
d = np.zeros(len(trade), dtype=int)
d[p.ls:], _, _ = signal_series(trade.mid, rules, p, start=p.ls)
report = run_backtest(trade, d, backtest_config(p))
print(f"{report.trade_count} trades, profit {report.final_profit_pct:+.3f}%, "
      f"max drawdown {report.max_drawdown_pct:.3f}%")

# %%
# Self-education: rather than fixing ls and rho_min, re-pick them on every
# learning window by in-sample Sharpe, then trade the following window.
grid = {"ls": [30, 60], "rho_min": [1.05, 1.2]}
run = run_self_education(ticks, grid, schedule=(10_000, 5_000), base=p)
for step in run.steps:
    print(f"learn {step.learn} -> trade {step.trade}: ls={step.params.ls}, rho_min={step.params.rho_min}, "
          f"in-sample Sharpe {step.objective:.3f}")
report = run_backtest(ticks, run.directions, BacktestConfig(horizon=p.horizon))
print(f"walk-forward: {report.trade_count} trades, profit {report.final_profit_pct:+.3f}%")

# %%
# Leverage: sizing is a fixed fraction of the initial equity times leverage,
# so doubling leverage doubles every trade's pnl and the final profit.
lo = run_backtest(ticks, run.directions, BacktestConfig(horizon=p.horizon, leverage=5))
hi = run_backtest(ticks, run.directions, BacktestConfig(horizon=p.horizon, leverage=10))
cmp = leverage_scaling_check(lo, hi)
print(f"leverage 5 -> 10: profit {lo.final_profit_pct:+.3f}% -> {hi.final_profit_pct:+.3f}%, "
      f"linear: {cmp.is_linear(1e-9)}")

# %%
# Equity by day (the stream covers less than a day here) and by trade.
print("equity by day:", [(str(day), round(e, 2)) for day, e in hi.equity_by_day])
print("equity after the last five trades:", np.round(hi.equity_by_trade[-5:], 2))
