"""Exhaustive grid search with deterministic ranking.

Every grid point is evaluated exactly once.  An objective is any picklable
callable ``objective(data, point) -> value`` or ``-> (value, aux_dict)``;
exceptions and NaN results mark the point as failed instead of aborting the
sweep.  Ranking is a stable sort on (failed, objective, parameter tuple), so
serial and parallel runs produce identical output.
"""
from __future__ import annotations

import itertools
import logging
import math
import os
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoCandidateError, ParameterError, StringPredError
from .marketdata import TickSeries, as_prices

logger = logging.getLogger(__name__)


def _parse_value(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


class ParameterGrid:
    """Cartesian product of named axes, iterated in axis order (last axis fastest)."""

    def __init__(self, axes: Mapping[str, Sequence]):
        self.axes: dict[str, tuple] = {}
        for name, values in axes.items():
            vals = tuple(values) if isinstance(values, (list, tuple, np.ndarray, range)) else (values,)
            if not vals:
                raise ParameterError(f"axis {name!r} is empty")
            self.axes[name] = tuple(v.item() if isinstance(v, np.generic) else v for v in vals)
        if not self.axes:
            raise ParameterError("grid has no axes")

    @classmethod
    def from_text(cls, text: str) -> ParameterGrid:
        """Parse ``name = v1, v2, ...`` lines; ``#`` starts a comment."""
        axes = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"grid line {lineno}: expected 'name = values'")
            name, values = line.split("=", 1)
            axes[name.strip()] = [_parse_value(v) for v in values.split(",") if v.strip()]
        return cls(axes)

    @classmethod
    def read(cls, path) -> ParameterGrid:
        with open(path) as fh:
            return cls.from_text(fh.read())

    @property
    def names(self) -> list[str]:
        return list(self.axes)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        for combo in itertools.product(*self.axes.values()):
            yield dict(zip(self.axes, combo))

    def __repr__(self) -> str:
        dims = "x".join(str(len(v)) for v in self.axes.values())
        return f"ParameterGrid({', '.join(self.axes)}; {dims} = {self.size})"


@dataclass(frozen=True)
class GridResult:
    params: dict
    objective: float
    aux: dict = field(default_factory=dict)
    failed: bool = False
    feasible: bool = True
    error: str | None = None

    def key(self) -> tuple:
        return tuple(self.params.values())


def _sort_key(value) -> tuple:
    return (0, value, "") if isinstance(value, (int, float)) else (1, 0, str(value))


def _evaluate(objective, data, point: dict) -> tuple[float, dict, str | None]:
    try:
        out = objective(data, point)
    except (StringPredError, ArithmeticError, ValueError) as exc:
        return math.nan, {}, f"{type(exc).__name__}: {exc}"
    value, aux = out if isinstance(out, tuple) else (out, {})
    value = float(value)
    return value, dict(aux), None if math.isfinite(value) else "non-finite objective"


def _evaluate_star(args):
    return _evaluate(*args)


def grid_search(data, grid, objective, constraints: Mapping[str, float] | None = None,
                minimize: bool = True, workers: int = 1) -> list[GridResult]:
    """Evaluate ``objective`` on every point and return results best first.

    ``constraints`` maps an aux metric name to its maximum allowed value;
    violating points stay in the list with ``feasible=False``.
    """
    grid = grid if isinstance(grid, ParameterGrid) else ParameterGrid(grid)
    if isinstance(objective, str):
        objective = OBJECTIVES[objective]
    points = list(grid)
    tasks = [(objective, data, pt) for pt in points]
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1
    if workers == 1 or len(points) < 2:
        outcomes = [_evaluate_star(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_evaluate_star, tasks, chunksize=chunk))

    bad = math.inf if minimize else -math.inf
    results = []
    for pt, (value, aux, err) in zip(points, outcomes):
        failed = err is not None
        feasible = not failed
        if constraints and not failed:
            for name, limit in constraints.items():
                v = aux.get(name, math.nan)
                if not (isinstance(v, (int, float)) and v <= limit):
                    feasible = False
        results.append(GridResult(pt, bad if failed else value, aux, failed, feasible, err))
    if sum(r.failed for r in results):
        logger.info("%d of %d grid points failed", sum(r.failed for r in results), len(results))
    return rank(results, minimize)


def rank(results: list[GridResult], minimize: bool = True) -> list[GridResult]:
    sign = 1.0 if minimize else -1.0
    return sorted(
        results,
        key=lambda r: (r.failed, sign * r.objective, tuple(_sort_key(v) for v in r.params.values())),
    )


def select_best(results: list[GridResult], rule: str = "eval-mae", enforce_constraints: bool = True) -> GridResult:
    """Top admissible result under ``eval-mae`` (lowest MAE) or ``sharpe-then-profit``."""
    pool = [r for r in results if not r.failed and (r.feasible or not enforce_constraints)]
    if rule == "sharpe-then-profit":
        pool = [r for r in pool if math.isfinite(r.aux.get("sharpe", math.nan))]
    if not pool:
        raise NoCandidateError("no admissible grid result")
    tie = lambda r: tuple(_sort_key(v) for v in r.params.values())  # noqa: E731
    if rule == "eval-mae":
        return min(pool, key=lambda r: (r.aux.get("mae", r.objective), tie(r)))
    if rule == "sharpe-then-profit":
        return min(pool, key=lambda r: (-r.aux["sharpe"], -r.aux.get("profit_pct", -math.inf), tie(r)))
    raise ParameterError(f"unknown selection rule {rule!r}")


@dataclass(frozen=True, eq=False)
class ErrorSurface:
    axis_x: str
    axis_y: str
    x: list
    y: list
    values: np.ndarray  # shape (len(y), len(x)); NaN marks failed or missing points

    def argmin(self) -> tuple:
        if np.all(np.isnan(self.values)):
            raise NoCandidateError("surface has no finite cell")
        iy, ix = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return self.x[ix], self.y[iy]


def error_surface(results: list[GridResult], axis_x: str, axis_y: str, fixed: Mapping | None = None) -> ErrorSurface:
    """Objective over two axes.

    Other axes are held at the values in ``fixed``; axes not listed there
    are minimized over.
    """
    if not results:
        raise ParameterError("no results")
    names = list(results[0].params)
    for a in (axis_x, axis_y, *(fixed or {})):
        if a not in names:
            raise ParameterError(f"axis {a!r} not in grid {names}")
    fixed = dict(fixed or {})
    xs = sorted({r.params[axis_x] for r in results}, key=_sort_key)
    ys = sorted({r.params[axis_y] for r in results}, key=_sort_key)
    ix = {v: k for k, v in enumerate(xs)}
    iy = {v: k for k, v in enumerate(ys)}
    z = np.full((len(ys), len(xs)), np.nan)
    for r in results:
        if any(r.params[k] != v for k, v in fixed.items()) or r.failed:
            continue
        cell = (iy[r.params[axis_y]], ix[r.params[axis_x]])
        if np.isnan(z[cell]) or r.objective < z[cell]:
            z[cell] = r.objective
    return ErrorSurface(axis_x, axis_y, xs, ys, z)


def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_results(path, results: list[GridResult]) -> None:
    if not results:
        open(path, "w").close()
        return
    names = list(results[0].params)
    aux_names = sorted({k for r in results for k in r.aux})
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["rank", *names, "objective", *aux_names, "failed", "feasible"]) + "\n")
        for k, r in enumerate(results, start=1):
            row = [str(k), *(_cell(r.params[n]) for n in names),
                   repr(float(r.objective)), *(_cell(r.aux.get(a, math.nan)) for a in aux_names),
                   str(int(r.failed)), str(int(r.feasible))]
            fh.write(",".join(row) + "\n")


def write_surface(path, surface: ErrorSurface) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{surface.axis_y}\\{surface.axis_x}," + ",".join(str(v) for v in surface.x) + "\n")
        for yv, row in zip(surface.y, surface.values):
            fh.write(str(yv) + "," + ",".join(repr(float(v)) for v in row) + "\n")


# -- objectives --------------------------------------------------------------

@dataclass(frozen=True)
class ForecastObjective:
    """Mean absolute error of rolling PMBSI forecasts on a set of targets.

    ``targets`` is a callable ``(params, horizon) -> index array`` or a fixed
    array.  With ``trade=True`` the forecasts are also traded (zero-spread
    quotes at the series values, holding period = horizon) and the profit,
    drawdown and Sharpe land in ``aux``; ``leverage`` scales the position size.
    """

    targets: object = None
    mode: str = "direct"
    horizon: int = 1
    shift: object = "auto"
    base: object = None
    trade: bool = False
    leverage: float = 1.0

    def params_for(self, point: dict):
        from .pmbsi import PmbsiParams

        base = self.base or PmbsiParams(ls=2, l_pr=1)
        point = dict(point)
        if self.mode == "direct":
            point.setdefault("l_pr", self.horizon)
        else:
            point["l_pr"] = 1
        ls = int(point.get("ls", base.ls))
        if point.get("l_pr", base.l_pr) >= ls:
            raise ParameterError("horizon must be shorter than ls")
        return replace(base, **point)

    def __call__(self, data, point: dict):
        from .metrics import MetricError, smape
        from .pmbsi import forecast_series

        p = self.params_for(point)
        steps = self.horizon if self.mode == "iterated" else None
        h = p.l_pr if self.mode == "direct" else self.horizon
        targets = self.targets(p, h) if callable(self.targets) else self.targets
        run = forecast_series(data, p, targets=targets, mode=self.mode, steps=steps, shift=self.shift)
        if len(run) == 0:
            raise ParameterError("no targets for this parameter point")
        err = float(np.mean(np.abs(run.actual - run.forecast)))
        aux = {"mae": err, "invalid_fraction": run.invalid_fraction}
        try:
            aux["smape"] = smape(run.actual, run.forecast)
        except MetricError:
            aux["smape"] = math.nan
        if self.trade:
            aux.update(_trade_forecasts(data, run, p, h, self.leverage))
        return err, aux


def _trade_forecasts(data, run, p, horizon: int, leverage: float = 1.0) -> dict:
    from .backtest import BacktestConfig, run_backtest
    from .pmbsi import forecast_signals

    x = as_prices(data) + run.shift
    ticks = TickSeries.from_mid(x, 0.0)
    o = getattr(data, "origin_index", 0)
    shifted = replace(run, origin=run.origin - o)
    sig = forecast_signals(shifted, len(x), epsilon=p.epsilon)
    rep = run_backtest(ticks, sig, BacktestConfig(leverage=leverage, horizon=horizon, stop_on_ruin=False))
    return {
        "profit_pct": float(rep.final_profit_pct),
        "max_drawdown": float(rep.max_drawdown_pct) / 100.0,
        "sharpe": float(rep.sharpe),
        "trades": rep.trade_count,
    }


def _trading(data, point):
    from .pmbcs import trading_objective

    return trading_objective(data, point)


OBJECTIVES = {
    "eval-mae": ForecastObjective(),
    "sharpe": _trading,
}
