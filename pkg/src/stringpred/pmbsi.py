"""Forecasting from string invariants.

Two predictors live here:

* the simple correlation invariant ``C(t, l0)`` with exponentially decaying
  weights, which yields a one-step forecast from ``C(t, 0) = C(t+1, 0)``;
* the parametrized family ``C(tau, Lambda)`` mixing the 2-end-point map with
  its two factors via the homotopy parameters ``eta1``, ``eta2``.  Assuming
  ``C(tau, Lambda) = C(tau - l_pr, Lambda)`` and solving for the unknown
  right end point ``p(tau + ls)`` gives an ``l_pr``-step forecast.

Whenever the closed form breaks down (non-positive base of the ``1/Q`` root,
zero denominator) the forecast is flagged invalid and the caller's last
valid forecast is substituted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, FlatPriceError, ParameterError, ValidationError, ZeroPriceError
from .marketdata import PriceSeries, as_prices
from .metrics import ErrorReport, direction_hit_rate, error_report, exact_hit_rate
from .stringmap import one_minus_ratio_pow, positive_window


@dataclass(frozen=True)
class SimpleInvariantParams:
    l: int
    l0: int = 0
    lam: float = 1.0

    def __post_init__(self):
        if self.l < 0 or not (0 <= self.l0 <= self.l):
            raise ParameterError(f"need 0 <= l0 <= l, got l={self.l} l0={self.l0}")
        if not self.lam > 0:
            raise ParameterError(f"decay scale must be positive, got {self.lam}")


@dataclass(frozen=True)
class PmbsiParams:
    ls: int
    l_pr: int = 1
    Q: float = 1.0
    eta1: float = 0.0
    eta2: float = 0.0
    W0: float = 0.5
    epsilon: float = math.inf

    def __post_init__(self):
        if int(self.ls) != self.ls or int(self.l_pr) != self.l_pr:
            raise ParameterError("ls and l_pr must be integers")
        object.__setattr__(self, "ls", int(self.ls))
        object.__setattr__(self, "l_pr", int(self.l_pr))
        if not (1 <= self.l_pr < self.ls):
            raise ParameterError(f"need 1 <= l_pr < ls, got l_pr={self.l_pr} ls={self.ls}")
        if self.Q == 0 or not math.isfinite(self.Q):
            raise ParameterError("Q must be a finite nonzero real")
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not -1 <= v <= 1:
                raise ParameterError(f"{name} must lie in [-1, 1], got {v}")
        if not 0 <= self.W0 <= 1:
            raise ParameterError(f"W0 must lie in [0, 1], got {self.W0}")
        if not self.epsilon >= 0:
            raise ParameterError("epsilon must be non-negative")

    @property
    def Lambda(self) -> int:
        return self.ls - self.l_pr


@dataclass(frozen=True)
class AuxTerms:
    A1: float
    A2: float
    A3: float
    A4: float
    A5: float


@dataclass(frozen=True)
class Forecast:
    value: float
    valid: bool
    epsilon_observed: float = math.nan
    index: int | None = None


# -- simple correlation invariant -------------------------------------------

def weights_exp(p: SimpleInvariantParams) -> np.ndarray:
    e = np.exp(-np.arange(p.l + 1) / p.lam)
    return e / e.sum()


def corr_invariant_simple(s, t: int, p: SimpleInvariantParams, l0: int | None = None) -> float:
    """``sum_{h=l0}^{l} w_h (1 - p[t-h]/p[t-1-h]) (1 - p[t-1-h]/p[t-2-h])``."""
    x = as_prices(s)
    l0 = p.l0 if l0 is None else l0
    if t - 2 - p.l < 0 or t - l0 > len(x) - 1:
        raise BoundsError(f"invariant at t={t} needs indices [{t - 2 - p.l}, {t - l0}]")
    h = np.arange(l0, p.l + 1)
    a, b, c = x[t - h], x[t - 1 - h], x[t - 2 - h]
    for arr, off in ((b, 1), (c, 2)):
        if np.any(arr == 0):
            raise ZeroPriceError(int(t - off - h[np.argmax(arr == 0)]))
    w = weights_exp(p)[h]
    return float(np.sum(w * (1 - a / b) * (1 - b / c)))


def predict_one_step_simple(s, t: int, p: SimpleInvariantParams) -> Forecast:
    """Forecast ``p[t+1]`` assuming ``C(t, 0) = C(t+1, 0)``."""
    x = as_prices(s)
    if t < 1 or t > len(x) - 1:
        raise BoundsError(f"origin {t} outside series")
    if x[t] == x[t - 1]:
        raise FlatPriceError(f"p[{t}] == p[{t - 1}]")
    c_now = corr_invariant_simple(x, t, p, l0=0)
    c_next_tail = corr_invariant_simple(x, t + 1, p, l0=1)
    w0 = weights_exp(p)[0]
    value = x[t] * (1 + (c_next_tail - c_now) / (w0 * (1 - x[t] / x[t - 1])))
    eps = math.nan
    if t - 3 - p.l >= 0:
        eps = abs(c_now - corr_invariant_simple(x, t - 1, p, l0=0))
    return Forecast(float(value), bool(np.isfinite(value)), eps, t + 1)


# -- parametrized string invariant -------------------------------------------

def bimodal_weights(ls: int, W0: float) -> np.ndarray:
    h = np.arange(ls + 1)
    return np.where(2 * h <= ls, 1.0 - W0, W0)


def _invariant_rows(rows: np.ndarray, Lam: int, p: PmbsiParams, W: np.ndarray) -> np.ndarray:
    """C(tau, Lambda) for each row ``p(tau..tau+ls)``."""
    x = rows[:, :Lam + 1]
    a = one_minus_ratio_pow(rows[:, :1], x, p.Q)
    b = one_minus_ratio_pow(x, rows[:, -1:], p.Q)
    w = W[:Lam + 1]
    e1, e2 = p.eta1, p.eta2
    return (1 - e1) * (1 - e2) * ((a * b) @ w) + e1 * (1 - e2) * (a @ w) + e2 * (b @ w)


def _aux_rows(y: np.ndarray, p: PmbsiParams, W: np.ndarray) -> tuple[np.ndarray, ...]:
    """A1..A5 for each row ``p(tau..tau+Lambda)``."""
    w = W[:y.shape[1]]
    a = one_minus_ratio_pow(y[:, :1], y, p.Q)
    xq = np.exp(p.Q * np.log(y))
    e1, e2 = p.eta1, p.eta2
    aw = a @ w
    A1 = (1 - e1) * (1 - e2) * aw
    A2 = -(1 - e1) * (1 - e2) * ((a * xq) @ w)
    A3 = e1 * (1 - e2) * aw
    A4 = np.full(len(y), e2 * w.sum())
    A5 = -e2 * (xq @ w)
    return A1, A2, A3, A4, A5


def _solve_endpoint(c_target, aux, Q: float) -> np.ndarray:
    """Solve ``c_target = A1 + A3 + A4 + (A2 + A5) / X**Q`` for X; NaN where undefined."""
    A1, A2, A3, A4, A5 = aux
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        den = c_target - A1 - A3 - A4
        base = (A2 + A5) / den
        ok = np.isfinite(base) & (base > 0) & (den != 0)
        out = np.full(np.shape(base), np.nan)
        out[ok] = np.exp(np.log(base[ok]) / Q)
    out[~np.isfinite(out)] = np.nan
    return out


def forecast_rows(rows: np.ndarray, p: PmbsiParams, W: np.ndarray | None = None) -> np.ndarray:
    """Raw ``l_pr``-ahead forecasts for rows ``p(tau0-ls..tau0)``; NaN marks invalid."""
    if W is None:
        W = bimodal_weights(p.ls, p.W0)
    Lam = p.Lambda
    c_prev = _invariant_rows(rows, Lam, p, W)
    aux = _aux_rows(rows[:, p.l_pr:], p, W)
    return _solve_endpoint(c_prev, aux, p.Q)


def _check_lambda(Lam: int, p: PmbsiParams) -> None:
    if not 0 <= Lam <= p.ls:
        raise ParameterError(f"Lambda must lie in [0, {p.ls}], got {Lam}")


def string_invariant(s, tau: int, Lam: int, p: PmbsiParams) -> float:
    _check_lambda(Lam, p)
    w = positive_window(s, tau, p.ls + 1)
    return float(_invariant_rows(w[None, :], Lam, p, bimodal_weights(p.ls, p.W0))[0])


def aux_terms(s, tau: int, Lam: int, p: PmbsiParams) -> AuxTerms:
    """Auxiliary sums over ``h = 0..Lambda``; ``p(tau + ls)`` is not referenced."""
    _check_lambda(Lam, p)
    y = positive_window(s, tau, Lam + 1)
    vals = _aux_rows(y[None, :], p, bimodal_weights(p.ls, p.W0))
    return AuxTerms(*(float(v[0]) for v in vals))


def reconstruct_endpoint(s, tau: int, p: PmbsiParams) -> float:
    """Recover ``p(tau + ls)`` from the same window's invariant and auxiliary terms.

    Algebraic round trip of the forecast formula; NaN if the inversion is
    undefined.
    """
    Lam = p.Lambda
    w = positive_window(s, tau, p.ls + 1)
    W = bimodal_weights(p.ls, p.W0)
    c = _invariant_rows(w[None, :], Lam, p, W)
    aux = _aux_rows(w[None, :Lam + 1], p, W)
    return float(_solve_endpoint(c, aux, p.Q)[0])


def invariance_deviation(s, tau: int, p: PmbsiParams) -> float:
    """``|C(tau, ls-l_pr) - C(tau-l_pr, ls-l_pr)|``."""
    if tau - p.l_pr < 0:
        raise BoundsError(f"deviation at tau={tau} needs index {tau - p.l_pr}")
    w = positive_window(s, tau - p.l_pr, p.ls + p.l_pr + 1)
    return float(_deviation_rows(w[None, :], p, bimodal_weights(p.ls, p.W0))[0])


def _deviation_rows(rows: np.ndarray, p: PmbsiParams, W: np.ndarray) -> np.ndarray:
    # rows hold p(tau-l_pr .. tau+ls)
    Lam = p.Lambda
    now = _invariant_rows(rows[:, p.l_pr:], Lam, p, W)
    before = _invariant_rows(rows[:, :p.ls + 1], Lam, p, W)
    return np.abs(now - before)


def _origin_checks(x: np.ndarray, tau0: int, p: PmbsiParams) -> None:
    if tau0 - p.ls < 0 or tau0 > len(x) - 1:
        raise BoundsError(f"forecast at origin {tau0} needs indices [{tau0 - p.ls}, {tau0}]")


def _observed_deviation(x: np.ndarray, tau0: int, p: PmbsiParams, W: np.ndarray) -> float:
    start = tau0 - p.ls - p.l_pr
    if start < 0:
        return math.nan
    return float(_deviation_rows(x[None, start:tau0 + 1], p, W)[0])


def predict(s, tau0: int, p: PmbsiParams, fallback: float | None = None) -> Forecast:
    """Forecast ``p(tau0 + l_pr)`` from data up to and including ``tau0``.

    An undefined closed form yields ``valid=False`` with ``fallback`` (or the
    last observed price when no fallback is given) as the value.
    """
    x = as_prices(s)
    _origin_checks(x, tau0, p)
    positive_window(x, tau0 - p.ls, p.ls + 1)
    W = bimodal_weights(p.ls, p.W0)
    raw = forecast_rows(x[None, tau0 - p.ls:tau0 + 1], p, W)[0]
    eps = _observed_deviation(x, tau0, p, W)
    if np.isnan(raw):
        value = float(x[tau0]) if fallback is None else float(fallback)
        return Forecast(value, False, eps, tau0 + p.l_pr)
    return Forecast(float(raw), True, eps, tau0 + p.l_pr)


def _iterate_chain(window: np.ndarray, p: PmbsiParams, steps: int, seed: float, W) -> tuple[float, bool]:
    work = list(window)
    running = seed
    all_valid = True
    for _ in range(steps):
        raw = forecast_rows(np.asarray(work[-(p.ls + 1):])[None, :], p, W)[0]
        if np.isnan(raw):
            all_valid = False
            work.append(running)
        else:
            running = float(raw)
            work.append(running)
    return work[-1], all_valid


def predict_iterated(s, tau0: int, p: PmbsiParams, steps: int, fallback: float | None = None) -> Forecast:
    """Apply the one-step predictor ``steps`` times, feeding forecasts back in."""
    if p.l_pr != 1:
        raise ParameterError("iterated prediction uses the one-step predictor (l_pr = 1)")
    if steps < 1:
        raise ParameterError("steps must be positive")
    x = as_prices(s)
    _origin_checks(x, tau0, p)
    window = positive_window(x, tau0 - p.ls, p.ls + 1)
    W = bimodal_weights(p.ls, p.W0)
    seed = float(x[tau0]) if fallback is None else float(fallback)
    value, ok = _iterate_chain(window, p, steps, seed, W)
    return Forecast(float(value), ok, _observed_deviation(x, tau0, p, W), tau0 + steps)


# -- rolling forecasts over a series -----------------------------------------

def nonzero_shift(x) -> float:
    """Constant that makes every element strictly positive (0 if already so)."""
    m = float(np.min(as_prices(x)))
    return 0.0 if m > 0 else 1.0 + abs(m)


@dataclass(frozen=True, eq=False)
class ForecastRun:
    """Rolling forecasts; arrays are aligned per target."""

    index: np.ndarray
    origin: np.ndarray
    actual: np.ndarray
    reference: np.ndarray
    forecast: np.ndarray
    valid: np.ndarray
    epsilon_observed: np.ndarray
    horizon: int
    shift: float = 0.0
    mode: str = "direct"
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.index)

    @property
    def invalid_fraction(self) -> float:
        return float(np.mean(~self.valid)) if len(self) else 0.0

    def error_report(self) -> ErrorReport:
        return error_report(self.actual, self.forecast)

    def hit_rates(self, tol: float = 0.0) -> dict:
        return {
            "direction": direction_hit_rate(self.actual, self.forecast, self.reference),
            "exact": exact_hit_rate(self.actual, self.forecast, tol),
        }


def _default_targets(n: int, first: int) -> np.ndarray:
    return np.arange(first, n)


def forecast_series(
    s,
    params: PmbsiParams | SimpleInvariantParams,
    targets=None,
    mode: str = "direct",
    steps: int | None = None,
    shift="auto",
) -> ForecastRun:
    """Forecast each target index from the data strictly before it.

    ``mode`` is ``"direct"`` (horizon ``params.l_pr``), ``"iterated"`` (the
    one-step predictor applied ``steps`` times) or ``"simple"`` (one-step
    correlation-invariant predictor, ``params`` a SimpleInvariantParams).
    ``shift="auto"`` adds ``1 + |min|`` when the series has non-positive
    values; forecasts are reported back on the original scale.
    """
    raw = as_prices(s)
    K = nonzero_shift(raw) if shift == "auto" else float(shift or 0.0)
    x = raw + K
    if np.any(x <= 0):
        raise ValidationError("series must be strictly positive after shifting")
    n = len(x)

    if mode == "simple":
        if not isinstance(params, SimpleInvariantParams):
            raise ParameterError("simple mode takes SimpleInvariantParams")
        horizon = 1
        first = params.l + 3
    elif mode in ("direct", "iterated"):
        if not isinstance(params, PmbsiParams):
            raise ParameterError(f"{mode} mode takes PmbsiParams")
        if mode == "direct":
            horizon = params.l_pr
        else:
            if params.l_pr != 1:
                raise ParameterError("iterated mode needs l_pr = 1")
            horizon = int(steps or 1)
            if horizon < 1:
                raise ParameterError("steps must be positive")
        first = params.ls + horizon
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    t = _default_targets(n, first) if targets is None else np.asarray(targets, dtype=int).reshape(-1)
    if len(t) and (t.min() < first or t.max() > n - 1):
        raise BoundsError(f"targets must lie in [{first}, {n - 1}] for this model")
    origin = t - horizon

    if mode == "simple":
        fc, valid, eps = _simple_rolling(x, origin, params)
    else:
        fc, valid, eps = _string_rolling(x, origin, params, mode, horizon)

    o = s.origin_index if isinstance(s, PriceSeries) else 0
    return ForecastRun(
        index=t + o,
        origin=origin + o,
        actual=raw[t],
        reference=raw[origin],
        forecast=fc - K,
        valid=valid,
        epsilon_observed=eps,
        horizon=horizon,
        shift=K,
        mode=mode,
    )


def _simple_rolling(x, origin, params):
    fc = np.empty(len(origin))
    valid = np.zeros(len(origin), dtype=bool)
    eps = np.full(len(origin), np.nan)
    last = None
    for i, t0 in enumerate(origin):
        try:
            f = predict_one_step_simple(x, int(t0), params)
            ok = f.valid
            value, eps[i] = f.value, f.epsilon_observed
        except FlatPriceError:
            ok = False
        if ok:
            last = value
            fc[i], valid[i] = value, True
        else:
            fc[i] = x[t0] if last is None else last
    return fc, valid, eps


def _string_rolling(x, origin, p: PmbsiParams, mode: str, horizon: int):
    W = bimodal_weights(p.ls, p.W0)
    m = len(origin)
    cols = np.arange(p.ls + 1)
    rows = x[origin[:, None] - p.ls + cols[None, :]] if m else np.empty((0, p.ls + 1))

    eps = np.full(m, np.nan)
    has_eps = origin - p.ls - p.l_pr >= 0
    if np.any(has_eps):
        o = origin[has_eps]
        ecols = np.arange(p.ls + p.l_pr + 1)
        erows = x[o[:, None] - p.ls - p.l_pr + ecols[None, :]]
        eps[has_eps] = _deviation_rows(erows, p, W)

    if mode == "direct":
        raw = forecast_rows(rows, p, W)
        dirty = np.isnan(raw)
    else:
        work = rows.copy()
        dirty = np.zeros(m, dtype=bool)
        raw = None
        for _ in range(horizon):
            step = forecast_rows(work[:, -(p.ls + 1):], p, W)
            bad = np.isnan(step)
            dirty |= bad
            step = np.where(bad, work[:, -1], step)
            work = np.concatenate([work, step[:, None]], axis=1)
            raw = step

    fc = np.empty(m)
    valid = ~dirty
    last = None
    for i in range(m):
        if not dirty[i]:
            fc[i] = raw[i]
            last = fc[i]
            continue
        seed = x[origin[i]] if last is None else last
        if mode == "direct":
            fc[i] = seed
        else:
            fc[i], _ = _iterate_chain(rows[i], p, horizon, seed, W)
    return fc, valid, eps


def forecast_signals(run: ForecastRun, n_ticks: int, epsilon: float = math.inf, threshold: float = 0.0) -> np.ndarray:
    """Per-tick directions (+1 long, -1 short, 0 flat) at each forecast origin.

    A site trades only when its forecast is valid and the observed invariance
    deviation is within ``epsilon``; NaN deviations (too little history) fail
    any finite ``epsilon``.
    """
    out = np.zeros(n_ticks, dtype=np.int8)
    move = run.forecast - run.reference
    if math.isinf(epsilon):
        calm = np.ones(len(run), dtype=bool)
    else:
        calm = run.epsilon_observed <= epsilon
    ok = run.valid & calm & (np.abs(move) > threshold)
    pos = run.origin[ok]
    if len(pos) and (pos.min() < 0 or pos.max() >= n_ticks):
        raise BoundsError("forecast origins fall outside the tick range")
    out[pos] = np.sign(move[ok]).astype(np.int8)
    return out
