"""Sinusoid benchmark: split, grid-optimize, validate, tabulate.

The canonical series is ``sin(2*pi*k/50)`` for ``k = 0..50``.  The first 26
points form the optimization segment and the remaining 25 the validation
segment.  A target ``t`` with horizon ``h`` is scored only once ``t - h``
lies ``h - 1`` ticks inside its segment, so validation targets run from
``26 + 2h - 1`` to 50 and evaluation targets end at 25.  Forecasts may read
any history before their origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .marketdata import PriceSeries, gen_sinusoid, split_counts
from .metrics import error_report
from .optimize import ForecastObjective, GridResult, ParameterGrid, grid_search, select_best
from .pmbsi import PmbsiParams, forecast_series

N_POINTS = 51
N_OPT = 26

DEFAULT_GRID = {
    "ls": list(range(2, 11)) + [900],
    "Q": [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 6.0],
    "eta1": [round(-0.8 + 0.2 * k, 1) for k in range(9)],
    "eta2": [round(-0.8 + 0.2 * k, 1) for k in range(9)],
    "W0": [0.0, 0.25, 0.5],
}

# 4 x 4 x 9 x 9 = 1296 points
DESK_GRID = {
    "ls": [2, 5, 6, 8],
    "Q": [0.1, 0.2, 0.3, 1.0],
    "eta1": DEFAULT_GRID["eta1"],
    "eta2": DEFAULT_GRID["eta2"],
    "W0": [0.5],
}


def canonical_sinusoid() -> PriceSeries:
    return gen_sinusoid(N_POINTS)


def benchmark_split(s=None):
    s = canonical_sinusoid() if s is None else s
    return split_counts(s, N_OPT, 0)


def eval_targets(p: PmbsiParams, horizon: int, n_opt: int = N_OPT) -> np.ndarray:
    first = max(2 * horizon - 1, p.ls + horizon)
    return np.arange(first, n_opt)


def validation_targets(horizon: int, n: int = N_POINTS, n_opt: int = N_OPT) -> np.ndarray:
    return np.arange(n_opt + 2 * horizon - 1, n)


@dataclass(frozen=True)
class EvalTargets:
    """Picklable target rule: every evaluable index below ``n_opt``."""

    n_opt: int = N_OPT

    def __call__(self, p: PmbsiParams, horizon: int) -> np.ndarray:
        return eval_targets(p, horizon, self.n_opt)


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    l_pr: int
    eval_mae: float
    valid_mae: float
    valid_smape: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "l_pr": self.l_pr,
            "eval_mae": self.eval_mae,
            "valid_mae": self.valid_mae,
            "valid_smape": self.valid_smape,
            "params": dict(self.params),
        }


def naive_row(s, horizon: int) -> BenchmarkRow:
    x = np.asarray(s, dtype=float)
    t = validation_targets(horizon, len(x))
    rep = error_report(x[t], x[t - horizon])
    return BenchmarkRow("naive", horizon, float("nan"), rep.mae, rep.smape)


def optimize_mode(s, mode: str, horizon: int, grid=None, workers: int = 1) -> list[GridResult]:
    grid = ParameterGrid(DEFAULT_GRID if grid is None else grid)
    if horizon > 1 and "ls" in grid.axes:
        # ls must exceed the horizon; drop axis values that cannot
        axes = dict(grid.axes)
        axes["ls"] = [v for v in axes["ls"] if v > (horizon if mode == "direct" else 1)]
        grid = ParameterGrid(axes)
    objective = ForecastObjective(targets=EvalTargets(), mode=mode, horizon=horizon)
    return grid_search(s, grid, objective, workers=workers)


def validate(s, params: PmbsiParams, mode: str, horizon: int):
    steps = horizon if mode == "iterated" else None
    run = forecast_series(s, params, targets=validation_targets(horizon, len(s)), mode=mode, steps=steps)
    return run


def model_row(s, mode: str, horizon: int, grid=None, workers: int = 1) -> BenchmarkRow:
    results = optimize_mode(s, mode, horizon, grid, workers)
    best = select_best(results, "eval-mae")
    p = ForecastObjective(mode=mode, horizon=horizon).params_for(best.params)
    rep = validate(s, p, mode, horizon).error_report()
    return BenchmarkRow(f"pmbsi-{mode}", horizon, best.objective, rep.mae, rep.smape, dict(best.params))


def reproduce_sinusoid(grid=None, workers: int = 1, horizons=(1, 2, 3)) -> list[BenchmarkRow]:
    """Table of naive, direct and iterated results on the canonical sinusoid."""
    s = canonical_sinusoid()
    rows = [model_row(s, "direct", h, grid, workers) for h in horizons]
    rows += [model_row(s, "iterated", h, grid, workers) for h in horizons if h > 1]
    rows += [naive_row(s, h) for h in horizons]
    return rows


def format_table(rows: list[BenchmarkRow]) -> str:
    lines = [f"{'method':<16}{'l_pr':>5}{'eval MAE':>12}{'valid MAE':>12}{'valid SMAPE':>13}  params"]
    for r in rows:
        params = " ".join(f"{k}={v}" for k, v in r.params.items())
        lines.append(f"{r.method:<16}{r.l_pr:>5}{r.eval_mae:>12.6f}{r.valid_mae:>12.6f}{r.valid_smape:>13.4f}  {params}")
    return "\n".join(lines)
