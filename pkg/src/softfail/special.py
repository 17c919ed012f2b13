"""Complementary error function for the BER chain.

Two regimes, both vectorised over numpy arrays:

* ``x < 1.5``: Maclaurin series of erf, ``erfc = 1 - erf``. Below the
  cutoff erfc > 0.03, so the subtraction loses little.
* ``x >= 1.5``: Laplace continued fraction for the scaled function
  ``erfcx(x) = exp(x**2) * erfc(x)``, evaluated bottom-up with a fixed depth.
  Working with ``erfcx`` keeps ``log_erfc`` finite far past the float64
  underflow of erfc itself (x ~ 26.5).

Measured relative error against 50-digit mpmath is below 1e-13 on [0, 26]
(see tests/test_special.py).
"""
from __future__ import annotations

import math

import numpy as np

_SERIES_CUTOFF = 1.5
_SERIES_TERMS = 40
_CF_DEPTH = 200
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    x2 = x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * (-x2) / n
        total = total + term / (2 * n + 1)
    return 2.0 * _INV_SQRT_PI * total


def _erfcx_cf(x: np.ndarray) -> np.ndarray:
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tail = np.zeros_like(x)
    for n in range(_CF_DEPTH, 0, -1):
        tail = (0.5 * n) / (x + tail)
    return _INV_SQRT_PI / (x + tail)


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)`` for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("erfcx is implemented for x >= 0 only")
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        out[small] = np.exp(xs * xs) * (1.0 - _erf_series(xs))
    if np.any(~small):
        out[~small] = _erfcx_cf(x[~small])
    return out if out.ndim else float(out)


def erfc(x):
    """Complementary error function for x >= 0 (underflows to 0 past x ~ 26.5)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("erfc is implemented for x >= 0 only")
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    if np.any(small):
        out[small] = 1.0 - _erf_series(x[small])
    if np.any(~small):
        xl = x[~small]
        with np.errstate(under="ignore"):
            out[~small] = np.exp(-xl * xl) * _erfcx_cf(xl)
    return out if out.ndim else float(out)


def log_erfc(x):
    """Natural log of erfc(x), finite for all x >= 0."""
    x = np.asarray(x, dtype=float)
    return np.log(erfcx(x)) - x * x
