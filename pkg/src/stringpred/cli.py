"""Command-line entry point.

Every subcommand reads its options from flags, optionally pre-filled from an
INI-style ``--config`` file whose section names match the subcommand (keys
equal the long flag names with dashes or underscores).  Flags always win
over the config file.  A JSON summary is written for every run, including
failed ones.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import DIRECTION_CODES, BacktestConfig, run_backtest, write_equity, write_trades
from .benchmark import DEFAULT_GRID, format_table, reproduce_sinusoid
from .errors import (
    AlignmentError,
    BoundsError,
    DegenerateWindowError,
    FlatPriceError,
    MetricError,
    NoCandidateError,
    ParameterError,
    ParseError,
    UndefinedStatisticError,
    ValidationError,
    ZeroPriceError,
)
from .marketdata import PriceSeries, gen_random_walk_ticks, read_series, read_ticks, write_series
from .metrics import error_report
from .optimize import ForecastObjective, ParameterGrid, error_surface, grid_search, select_best, write_results, write_surface
from .pmbcs import PmbcsParams, accumulate_stats, learn_rules, run_self_education, signal_series, write_signals
from .pmbsi import PmbsiParams, SimpleInvariantParams, forecast_series
from .stringmap import StringWindowConfig, compactify, standardize, string1, string2

logger = logging.getLogger("stringpred")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_DIR_ENV = "STRINGPRED_DATA_DIR"

_DATA_ERRORS = (ParseError, ValidationError, ZeroPriceError, BoundsError, AlignmentError)
_NUMERIC_ERRORS = (MetricError, FlatPriceError, DegenerateWindowError, UndefinedStatisticError, NoCandidateError,
                   FloatingPointError)


class UsageError(Exception):
    pass


def _resolve_input(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing {what}")
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        p = Path(os.environ[DATA_DIR_ENV]) / path
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _float(text: str) -> float:
    return float(text)


# -- subcommands -------------------------------------------------------------

def cmd_transform(args) -> dict:
    s = read_series(_resolve_input(args.input, "input series"))
    cfg = StringWindowConfig(args.ls, args.Q, args.Nm)
    tau = args.tau - s.origin_index
    if args.kind == "string1":
        vals = np.asarray(string1(s, tau, cfg))
    elif args.kind == "string2":
        vals = np.asarray(string2(s, tau, cfg))
    elif args.kind == "compactify":
        vals = np.asarray(compactify(s, cfg, tau))
    else:
        if tau < 0 or tau + cfg.ls + 1 > len(s):
            raise BoundsError(f"window at {args.tau} of length {cfg.ls + 1} outside series")
        vals = standardize(np.asarray(s)[tau:tau + cfg.ls + 1])
    write_series(args.output, PriceSeries(vals), header=("h", "value"))
    return {"kind": args.kind, "tau": args.tau, "ls": cfg.ls, "Q": cfg.Q, "Nm": cfg.Nm, "points": len(vals)}


def _pmbsi_params(args) -> PmbsiParams:
    return PmbsiParams(ls=args.ls, l_pr=args.lpr if args.mode == "direct" else 1, Q=args.Q, eta1=args.eta1,
                       eta2=args.eta2, W0=args.W0, epsilon=args.epsilon)


def cmd_forecast(args) -> dict:
    s = read_series(_resolve_input(args.input, "input series"))
    if args.mode == "simple":
        params = SimpleInvariantParams(l=args.l, lam=args.lam)
        run = forecast_series(s, params, mode="simple", shift=args.shift)
    else:
        params = _pmbsi_params(args)
        steps = args.lpr if args.mode == "iterated" else None
        run = forecast_series(s, params, mode=args.mode, steps=steps, shift=args.shift)
    with open(args.output, "w", newline="") as fh:
        fh.write("index,actual,forecast,valid,epsilon_observed\n")
        for i, a, f, v, e in zip(run.index, run.actual, run.forecast, run.valid, run.epsilon_observed):
            fh.write(f"{int(i)},{float(a)!r},{float(f)!r},{int(v)},{float(e)!r}\n")
    out = {"mode": args.mode, "targets": len(run), "shift": run.shift, "invalid_fraction": run.invalid_fraction}
    if len(run):
        out.update(run.error_report().to_dict())
        out.update(run.hit_rates())
    return out


def _ticks(args):
    if args.input:
        return read_ticks(_resolve_input(args.input, "input ticks"))
    if args.synthetic:
        return gen_random_walk_ticks(args.synthetic, seed=args.seed)
    raise UsageError("give --input or --synthetic N")


def _pmbcs_params(args) -> PmbcsParams:
    return PmbcsParams(
        ls=args.ls, m=args.m, Q=args.Q, phi=args.phi, bins=args.bins, D_threshold=args.D_threshold,
        rho_min=args.rho_min, skew_min=args.skew_min, sharpe_min=args.sharpe_min, max_positions=args.max_positions,
        hourly_cap=args.hourly_cap, horizon=args.horizon, min_occupancy=args.min_occupancy, template=args.template,
        benchmark_return=args.benchmark_return,
    )


def cmd_pmbcs(args) -> dict:
    ticks = _ticks(args)
    p = _pmbcs_params(args)
    n = len(ticks)
    learn, trade = args.learn, args.trade
    if args.grid:
        grid = ParameterGrid.read(_resolve_input(args.grid, "grid file"))
        run = run_self_education(ticks, grid, (learn, trade), p, workers=args.workers)
        d, M, b, dkl = run.directions, run.momenta, run.bins, run.dkl
        lo = learn
        hi = learn + len(run.steps) * trade
        extra = {"windows": len(run.steps), "chosen": [dict(st.aux, **_changed(st.params, p)) for st in run.steps]}
    else:
        if n < learn + 1:
            raise BoundsError(f"need more than {learn} ticks, got {n}")
        mid = ticks.mid
        stats = accumulate_stats(mid[:learn], ticks.spread[:learn], p)
        rules = learn_rules(stats, p)
        lo, hi = learn, min(n, learn + trade)
        dd, mm, bb = signal_series(mid, rules, p, start=lo, stop=hi)
        d = np.zeros(n, dtype=np.int8)
        M = np.full(n, np.nan)
        b = np.full(n, -1)
        d[lo:hi], M[lo:hi], b[lo:hi] = dd, mm, bb
        dkl = np.where(d == 1, rules.long_gate.dkl, np.where(d == -1, rules.short_gate.dkl, np.nan))
        extra = {
            "long_gate": rules.long_gate.reason, "short_gate": rules.short_gate.reason,
            "dkl_long": rules.long_gate.dkl, "dkl_short": rules.short_gate.dkl,
            "long_bins": sorted(rules.long_bins), "short_bins": sorted(rules.short_bins),
        }
    idx = np.arange(lo, hi)
    write_signals(args.output, idx, M[lo:hi], d[lo:hi], b[lo:hi], dkl[lo:hi])
    return {"ticks": n, "signal_range": [int(lo), int(hi)], "long": int(np.sum(d == 1)),
            "short": int(np.sum(d == -1)), **extra}


def _changed(p: PmbcsParams, base: PmbcsParams) -> dict:
    return {k: v for k, v in vars(p).items() if getattr(base, k) != v}


def _read_signals(path: Path, n: int) -> np.ndarray:
    d = np.zeros(n, dtype=np.int8)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"index", "direction"} <= set(reader.fieldnames):
            raise ParseError("signals CSV needs 'index' and 'direction' columns", 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                i = int(row["index"])
                raw = row["direction"].strip()
                code = DIRECTION_CODES[raw] if raw in DIRECTION_CODES else int(np.sign(float(raw)))
            except (KeyError, ValueError, TypeError):
                raise ParseError(f"bad signal record {row}", lineno) from None
            if not 0 <= i < n:
                raise AlignmentError(f"line {lineno}: signal index {i} outside [0, {n - 1}]")
            d[i] = code
    return d


def cmd_backtest(args) -> dict:
    ticks = _ticks(args)
    sig = _read_signals(_resolve_input(args.signals, "signals file"), len(ticks))
    cfg = BacktestConfig(
        initial_equity=args.initial_equity, leverage=args.leverage, position_fraction=args.position_fraction,
        max_positions=args.max_positions, hourly_cap=args.hourly_cap, commission=args.commission,
        horizon=args.horizon, units=args.units, stop_on_ruin=not args.no_ruin_stop,
    )
    rep = run_backtest(ticks, sig, cfg)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trades(out / "trades.csv", rep)
    write_equity(out / "equity_trade.csv", out / "equity_day.csv", rep)
    return rep.summary()


def cmd_optimize(args) -> dict:
    grid = ParameterGrid.read(_resolve_input(args.grid, "grid file")) if args.grid else ParameterGrid(DEFAULT_GRID)
    constraints = {"max_drawdown": args.max_drawdown} if args.max_drawdown is not None else None
    if args.objective == "sharpe":
        from .pmbcs import trading_objective

        data = _ticks(args)
        results = grid_search(data, grid, trading_objective, constraints, minimize=False, workers=args.workers)
        best = select_best(results, "sharpe-then-profit")
    else:
        data = read_series(_resolve_input(args.input, "input series"))
        trade = constraints is not None
        objective = ForecastObjective(mode=args.mode, horizon=args.lpr, trade=trade, leverage=args.leverage)
        results = grid_search(data, grid, objective, constraints, workers=args.workers)
        best = select_best(results, "eval-mae")
    write_results(args.output, results)
    out = {"objective": args.objective, "points": len(results), "failed": sum(r.failed for r in results),
           "feasible": sum(r.feasible for r in results), "best": best.params, "best_objective": best.objective,
           "best_aux": best.aux}
    if args.surface:
        x, y = args.surface_axes
        fixed = dict(_parse_fixed(args.fix)) if args.fix else None
        surf = error_surface(results, x, y, fixed)
        write_surface(args.surface, surf)
        out["surface"] = {"x": x, "y": y, "argmin": list(surf.argmin())}
    return out


def _parse_fixed(items):
    from .optimize import _parse_value

    for item in items:
        if "=" not in item:
            raise UsageError(f"--fix expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        yield k.strip(), _parse_value(v)


def _read_pairs(args) -> tuple[np.ndarray, np.ndarray]:
    if args.input:
        with open(_resolve_input(args.input, "input file"), newline="") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"actual", "forecast"} <= set(reader.fieldnames):
                raise ParseError("CSV needs 'actual' and 'forecast' columns", 1)
            a, f = [], []
            for lineno, row in enumerate(reader, start=2):
                try:
                    a.append(float(row["actual"]))
                    f.append(float(row["forecast"]))
                except (TypeError, ValueError):
                    raise ParseError(f"bad record {row}", lineno) from None
        return np.array(a), np.array(f)
    a = read_series(_resolve_input(args.actual, "actual series"))
    f = read_series(_resolve_input(args.forecast, "forecast series"))
    if len(a) != len(f):
        raise AlignmentError(f"{len(a)} actuals vs {len(f)} forecasts")
    return np.asarray(a), np.asarray(f)


def cmd_metrics(args) -> dict:
    a, f = _read_pairs(args)
    if len(a) == 0:
        raise ValidationError("no records")
    rep = error_report(a, f).to_dict()
    if args.output:
        Path(args.output).write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return rep


def cmd_reproduce(args) -> dict:
    grid = ParameterGrid.read(_resolve_input(args.grid, "grid file")).axes if args.grid else None
    rows = reproduce_sinusoid(grid, workers=args.workers)
    with open(args.output, "w", newline="") as fh:
        fh.write("method,l_pr,eval_mae,valid_mae,valid_smape,params\n")
        for r in rows:
            params = " ".join(f"{k}={v}" for k, v in r.params.items())
            fh.write(f"{r.method},{r.l_pr},{float(r.eval_mae)!r},{float(r.valid_mae)!r},{float(r.valid_smape)!r},{params}\n")
    print(format_table(rows))
    return {"rows": [r.to_dict() for r in rows]}


# -- parser ------------------------------------------------------------------

def _add_pmbsi_flags(p):
    p.add_argument("--ls", type=int, default=2)
    p.add_argument("--lpr", type=int, default=1, help="horizon (direct) or number of steps (iterated)")
    p.add_argument("--Q", type=float, default=1.0)
    p.add_argument("--eta1", type=float, default=0.0)
    p.add_argument("--eta2", type=float, default=0.0)
    p.add_argument("--W0", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=math.inf)


def _add_tick_input(p):
    p.add_argument("--input", help="tick CSV (timestamp_ms,bid,ask)")
    p.add_argument("--synthetic", type=int, default=0, help="use N synthetic random-walk ticks instead of --input")
    p.add_argument("--seed", type=int, default=0)


def _add_pmbcs_flags(p):
    d = PmbcsParams()
    for name in ("ls", "m", "bins", "max_positions", "hourly_cap", "horizon", "min_occupancy"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int, default=getattr(d, name))
    for name in ("Q", "phi", "D_threshold", "rho_min", "skew_min", "sharpe_min", "benchmark_return"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=_float, default=getattr(d, name))
    p.add_argument("--template", choices=["cosine"], default=d.template)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="stringpred", description="String-invariant forecasting and trading tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with one section per subcommand")
    parser.add_argument("--summary", help="summary JSON path (default: <command>-summary.json)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    p = sub.add_parser("transform", help="string map of one window")
    p.add_argument("--input")
    p.add_argument("--output", default="transform.csv")
    p.add_argument("--kind", choices=["string1", "string2", "compactify", "standardize"], default="string2")
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--ls", type=int, default=2)
    p.add_argument("--Q", type=float, default=1.0)
    p.add_argument("--Nm", type=int, default=1)
    p.set_defaults(func=cmd_transform)
    subs["transform"] = p

    p = sub.add_parser("forecast", help="rolling PMBSI or simple-invariant forecasts")
    p.add_argument("--input")
    p.add_argument("--output", default="forecast.csv")
    p.add_argument("--mode", choices=["simple", "direct", "iterated"], default="direct")
    _add_pmbsi_flags(p)
    p.add_argument("--l", type=int, default=2, help="memory of the simple predictor")
    p.add_argument("--lam", type=float, default=1.0, help="weight decay of the simple predictor")
    p.add_argument("--shift", default="auto", help="'auto' or a constant added before forecasting")
    p.set_defaults(func=cmd_forecast)
    subs["forecast"] = p

    p = sub.add_parser("pmbcs", help="learn momentum rules and emit trading signals")
    _add_tick_input(p)
    p.add_argument("--output", default="signals.csv")
    _add_pmbcs_flags(p)
    p.add_argument("--learn", type=int, default=100_000, help="learning window length in ticks")
    p.add_argument("--trade", type=int, default=20_000, help="trading window length in ticks")
    p.add_argument("--grid", help="grid file; enables rolling re-optimization")
    p.set_defaults(func=cmd_pmbcs)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    subs["pmbcs"] = p

    p = sub.add_parser("backtest", help="execute a signals CSV against tick quotes")
    _add_tick_input(p)
    p.add_argument("--signals")
    p.add_argument("--output-dir", dest="output_dir", default="backtest")
    c = BacktestConfig()
    p.add_argument("--initial-equity", dest="initial_equity", type=float, default=c.initial_equity)
    p.add_argument("--leverage", type=float, default=c.leverage)
    p.add_argument("--position-fraction", dest="position_fraction", type=float, default=c.position_fraction)
    p.add_argument("--max-positions", dest="max_positions", type=int, default=c.max_positions)
    p.add_argument("--hourly-cap", dest="hourly_cap", type=int, default=c.hourly_cap)
    p.add_argument("--commission", type=float, default=c.commission)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--units", type=float, default=None)
    p.add_argument("--no-ruin-stop", dest="no_ruin_stop", action="store_true")
    p.set_defaults(func=cmd_backtest)
    subs["backtest"] = p

    p = sub.add_parser("optimize", help="exhaustive grid search")
    _add_tick_input(p)
    p.add_argument("--grid", help="grid file of 'name = v1, v2, ...' lines")
    p.add_argument("--objective", choices=["eval-mae", "sharpe"], default="eval-mae")
    p.add_argument("--mode", choices=["direct", "iterated"], default="direct")
    p.add_argument("--lpr", type=int, default=1)
    p.add_argument("--max-drawdown", dest="max_drawdown", type=float, default=None,
                   help="largest admissible drawdown as a fraction (0.05 = 5%%)")
    p.add_argument("--leverage", type=float, default=1.0, help="leverage when trading forecasts (eval-mae)")
    p.add_argument("--output", default="optimize.csv")
    p.add_argument("--surface", help="write an error surface CSV here")
    p.add_argument("--surface-axes", dest="surface_axes", nargs=2, default=["ls", "Q"], metavar=("X", "Y"))
    p.add_argument("--fix", nargs="*", help="name=value pairs fixing the remaining axes")
    p.set_defaults(func=cmd_optimize)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    subs["optimize"] = p

    p = sub.add_parser("metrics", help="MAE and SMAPE of forecasts")
    p.add_argument("--input", help="CSV with 'actual' and 'forecast' columns")
    p.add_argument("--actual", help="series CSV of actual values")
    p.add_argument("--forecast", help="series CSV of forecasts")
    p.add_argument("--output", help="write the report JSON here")
    p.set_defaults(func=cmd_metrics)
    subs["metrics"] = p

    p = sub.add_parser("reproduce-sinusoid", help="optimize and validate on the canonical sinusoid")
    p.add_argument("--grid", help="grid file overriding the default grid")
    p.add_argument("--output", default="sinusoid.csv")
    p.set_defaults(func=cmd_reproduce)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    subs["reproduce-sinusoid"] = p
    return parser, subs


def _apply_config(path: str, command: str, subparser: argparse.ArgumentParser) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path):
        raise UsageError(f"config file not found: {path}")
    if not cp.has_section(command):
        return
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "func")}
    defaults = {}
    for key, raw in cp.items(command):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"unknown key {key!r} in config section [{command}]")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = cp.getboolean(command, key)
        elif act.nargs in ("*", "+", 2):
            defaults[dest] = raw.split()
        else:
            try:
                defaults[dest] = act.type(raw) if act.type else raw
            except ValueError as exc:
                raise UsageError(f"config [{command}] {key}: {exc}") from None
            if act.choices and defaults[dest] not in act.choices:
                raise UsageError(f"config [{command}] {key}: {raw!r} not in {act.choices}")
    subparser.set_defaults(**defaults)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _write_summary(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.command:
        parser.print_usage(sys.stderr)
        print("stringpred: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    summary_path = args.summary or f"{args.command}-summary.json"
    payload = {"command": args.command, "version": __version__}
    try:
        if args.config:
            _apply_config(args.config, args.command, subs[args.command])
            args = parser.parse_args(argv)
        result = args.func(args)
        payload.update(status="ok", exit_code=EXIT_OK, result=result)
        code = EXIT_OK
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, ParameterError) as exc:
        code, kind, message = EXIT_USAGE, "usage", str(exc)
    except _DATA_ERRORS as exc:
        code, kind, message = EXIT_DATA, "data", str(exc)
    except _NUMERIC_ERRORS as exc:
        code, kind, message = EXIT_NUMERIC, "numeric", str(exc)
    except OSError as exc:
        code, kind, message = EXIT_USAGE, "usage", str(exc)
    if code != EXIT_OK:
        print(f"stringpred {args.command}: {kind} error: {message}", file=sys.stderr)
        payload.update(status="error", exit_code=code, error={"kind": kind, "message": message})
    try:
        _write_summary(summary_path, payload)
    except OSError as exc:
        print(f"stringpred: cannot write summary {summary_path}: {exc}", file=sys.stderr)
        return code or EXIT_USAGE
    return code
