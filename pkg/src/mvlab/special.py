"""Modified Bessel functions I0, I1 and the ratio r0 = I1/I0.

On the torus ``I_n(y) = int_0^1 cos(2 pi n x) exp(y cos(2 pi x)) dx``.  The
primary route is the ascending power series; the trapezoidal rule on that
integral is kept as an independent check.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ARGUMENT = 700.0
_SERIES_RTOL = 1e-17


def _check(n: int, y: float) -> float:
    if n not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {n}")
    y = float(y)
    if not math.isfinite(y) or abs(y) > MAX_ARGUMENT:
        raise ValueError(f"|y| must be at most {MAX_ARGUMENT}, got {y}")
    return y


def _series(n: int, y: float, log_scale: float = 0.0) -> float:
    """``exp(-log_scale) * sum_m (y/2)^(2m+n) / (m! (m+n)!)``."""
    half = 0.5 * y
    q = half * half
    if n == 0:
        term = math.exp(-log_scale)
    else:
        term = half * math.exp(-log_scale)
    total = term
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + n))
        total += term
        if abs(term) <= _SERIES_RTOL * abs(total) and m > q:
            break
        if term == 0.0 and m > q:
            break
    return total


def bessel_I(n: int, y: float) -> float:
    """``I_n(y)`` for ``n in {0, 1}`` and ``|y| <= 700``."""
    y = _check(n, y)
    return _series(n, y)


def bessel_I_scaled(n: int, y: float) -> float:
    """``exp(-|y|) I_n(y)``, safe from overflow over the whole range."""
    y = _check(n, y)
    return _series(n, y, log_scale=abs(y))


def bessel_I_quadrature(n: int, y: float, points: int = 2048) -> float:
    """Trapezoidal rule on ``int_T cos(2 pi n x) exp(y cos 2 pi x) dx``."""
    y = _check(n, y)
    x = np.arange(points) / points
    c = np.cos(2.0 * np.pi * x)
    return float(np.mean(np.cos(2.0 * np.pi * n * x) * np.exp(y * c)))


def r0(a: float) -> float:
    """``I1(a) / I0(a)``: odd, increasing, with range (-1, 1)."""
    a = _check(0, a)
    if abs(a) > 30.0:
        return bessel_I_scaled(1, a) / bessel_I_scaled(0, a)
    return _series(1, a) / _series(0, a)


def r0_array(a) -> np.ndarray:
    return np.vectorize(r0, otypes=[float])(a)


def log_bessel_I0(y: float) -> float:
    y = _check(0, y)
    return abs(y) + math.log(bessel_I_scaled(0, y))
