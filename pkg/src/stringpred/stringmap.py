"""String maps of a price window.

A string map turns the ``ls + 1`` prices ``p(tau), ..., p(tau + ls)`` into a
sequence over the internal coordinate ``h = 0..ls`` with fixed boundary
values: the 1-end-point map vanishes at ``h = 0``, the 2-end-point map at
both ends.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, DegenerateWindowError, ParameterError, ValidationError, ZeroPriceError
from .marketdata import PriceSeries, as_prices


@dataclass(frozen=True)
class StringWindowConfig:
    ls: int
    Q: float = 1.0
    Nm: int = 1

    def __post_init__(self):
        if int(self.ls) != self.ls or self.ls < 1:
            raise ParameterError(f"ls must be a positive integer, got {self.ls}")
        if not self.Q > 0:
            raise ParameterError(f"Q must be positive, got {self.Q}")
        if int(self.Nm) != self.Nm or self.Nm < 1:
            raise ParameterError(f"Nm must be a positive integer, got {self.Nm}")


@dataclass(frozen=True, eq=False)
class StringMapValues:
    values: np.ndarray
    base_index: int

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def positive_window(s, tau: int, length: int) -> np.ndarray:
    """Return ``p[tau:tau+length]`` after bounds and strict-positivity checks."""
    p = as_prices(s)
    if tau < 0 or tau + length > len(p):
        raise BoundsError(f"window [{tau}, {tau + length - 1}] outside series of length {len(p)}")
    w = p[tau:tau + length]
    if np.any(w <= 0):
        k = int(np.argmax(w <= 0))
        if w[k] == 0:
            raise ZeroPriceError(tau + k)
        raise ValidationError(f"negative price at index {tau + k}")
    return w


def one_minus_ratio_pow(num, den, Q: float) -> np.ndarray:
    """``1 - (num/den)**Q`` for positive prices, accurate when the ratio is near 1."""
    return -np.expm1(Q * np.log(np.asarray(num) / np.asarray(den))) + 0.0


def string1(s, tau: int, cfg: StringWindowConfig) -> StringMapValues:
    w = positive_window(s, tau, cfg.ls + 1)
    return StringMapValues(one_minus_ratio_pow(w[0], w, cfg.Q), tau)


def string2(s, tau: int, cfg: StringWindowConfig) -> StringMapValues:
    w = positive_window(s, tau, cfg.ls + 1)
    vals = one_minus_ratio_pow(w[0], w, cfg.Q) * one_minus_ratio_pow(w, w[-1], cfg.Q)
    return StringMapValues(vals + 0.0, tau)


def compactify(s, cfg: StringWindowConfig, tau: int) -> PriceSeries:
    """Average ``Nm`` consecutive ``ls``-long segments onto ``h = 0..ls``.

    Element h is ``mean_m p(tau + h + ls*m)`` for ``m < Nm``, so the last
    referenced index is ``tau + ls*Nm``.
    """
    p = as_prices(s)
    last = tau + cfg.ls * cfg.Nm
    if tau < 0 or last >= len(p):
        raise BoundsError(f"compactification needs index {last}, series has {len(p)} samples")
    idx = tau + np.arange(cfg.ls + 1)[None, :] + cfg.ls * np.arange(cfg.Nm)[:, None]
    origin = s.origin_index if isinstance(s, PriceSeries) else 0
    return PriceSeries(p[idx].mean(axis=0), origin + tau)


def standardize(window) -> np.ndarray:
    w = as_prices(window)
    lo, hi = w.min(), w.max()
    if hi == lo:
        raise DegenerateWindowError("constant window cannot be standardized")
    return (w - lo) / (hi - lo)
