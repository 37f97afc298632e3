"""
Forecasting a sinusoid with string invariants
=============================================

Walks through the forecasting side of the package on the canonical
51-point sine wave: string maps of a window, a single invariant forecast,
rolling forecasts against the naive baseline, and a small grid search with
an error surface.

Run with ``python3 demos/sinusoid_forecast.py``.
"""

# %%
# The data: one period of sin(2 pi k / 50), k = 0..50.  The first 26 points
# are used for choosing parameters, the rest for validation.
import numpy as np

from stringpred.benchmark import canonical_sinusoid, model_row, naive_row, validate
from stringpred.optimize import ForecastObjective, error_surface, grid_search, select_best
from stringpred.pmbsi import PmbsiParams, predict
from stringpred.stringmap import StringWindowConfig, string1, string2

s = canonical_sinusoid()
x = np.asarray(s)
print(f"{len(x)} points, min {x.min():+.3f}, max {x.max():+.3f}")

# %%
# String maps turn a window of prices into relative returns seen from its
# start (one end fixed) or from both ends (both ends pinned to zero).  The
# sine crosses zero, so shift it onto positive values first.
shifted = x + 2.0
cfg = StringWindowConfig(ls=6, Q=0.5)
print("string1:", np.round(np.asarray(string1(shifted, 10, cfg)), 4))
print("string2:", np.round(np.asarray(string2(shifted, 10, cfg)), 4))

# %%
# One forecast: the invariant built from the last ls + 1 prices is assumed
# to stay put, which pins down the next price.
p = PmbsiParams(ls=2, l_pr=1, Q=0.3, eta1=0.8, eta2=-0.2)
f = predict(shifted, 30, p)
print(f"forecast of p[31]: {f.value - 2.0:+.5f}   actual: {x[31]:+.5f}   valid: {f.valid}")

# %%
# Rolling forecasts over the validation half, against "tomorrow equals today".
# forecast_series applies the positive shift itself.
run = validate(s, p, "direct", 1)
print(f"PMBSI  validation MAE {run.error_report().mae:.6f} on {len(run)} targets")
print(f"naive  validation MAE {naive_row(s, 1).valid_mae:.6f}")

# %%
# Forecasting further ahead: direct forecasts jump l_pr steps at once,
# iterated ones take l_pr single steps and feed each forecast back in.  Each
# mode gets its own parameters, chosen on the first half over a small grid.
small = {"ls": [3, 4, 5, 6, 7, 9], "Q": [0.1, 0.2], "eta1": [0.4, 0.8], "eta2": [-0.8, -0.6, -0.4], "W0": [0.25, 0.5]}
for h in (2, 3):
    rows = [model_row(s, mode, h, small) for mode in ("direct", "iterated")]
    print(f"l_pr={h}: " + "   ".join(f"{r.method} MAE {r.valid_mae:.5f}" for r in rows))

# %%
# Parameter choice: evaluate every grid point on the first half and keep the
# lowest MAE.  The error surface shows MAE over (ls, Q), minimized over the
# remaining axes.
grid = {"ls": [2, 3, 4, 6, 8], "Q": [0.1, 0.3, 1.0, 3.0], "eta1": [0.0, 0.4, 0.8], "eta2": [-0.4, -0.2, 0.0]}
objective = ForecastObjective(targets=np.arange(11, 26))
results = grid_search(s, grid, objective)
best = select_best(results)
print("best on the first half:", best.params, f"MAE {best.objective:.6f}")

surface = error_surface(results, "ls", "Q")
print("\nMAE surface (rows Q, columns ls)")
print("      " + "".join(f"{v:>10}" for v in surface.x))
for q, row in zip(surface.y, surface.values):
    print(f"{q:>6}" + "".join(f"{v:10.5f}" for v in row))

chosen = objective.params_for(best.params)
print(f"\nvalidation MAE of the chosen point: {validate(s, chosen, 'direct', 1).error_report().mae:.6f}")
