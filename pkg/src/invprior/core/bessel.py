"""Bessel functions J0, Y0 (and the order-1 pair used by the scattering
Green's matrices).

Evaluation strategy: ascending power series below ``SWITCH = 8``, Hankel's
large-argument expansion (modulus/phase form, truncated at the smallest
term) at and above it.  Everything is vectorized over numpy arrays; the
public entry points also accept plain floats.
"""
from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.5772156649015329
SWITCH = 8.0

# Number of ascending-series terms: at x just below 8 the term magnitude
# (x^2/4)^m / (m!)^2 drops below 1e-25 by m ~ 30.
_SERIES_TERMS = 36


def _series_j0(x):
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for m in range(1, _SERIES_TERMS):
        term = term * (-q) / (m * m)
        acc = acc + term
    return acc


def _series_y0(x):
    # Y0 = (2/pi) [ (ln(x/2)+gamma) J0 + sum_{m>=1} (-1)^{m+1} H_m q^m/(m!)^2 ]
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.zeros_like(x)
    h = 0.0
    for m in range(1, _SERIES_TERMS):
        term = term * (-q) / (m * m)
        h += 1.0 / m
        acc = acc - h * term
    return (2.0 / np.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * _series_j0(x) + acc)


def _series_j1(x):
    q = 0.25 * x * x
    term = 0.5 * x
    acc = term
    for m in range(1, _SERIES_TERMS):
        term = term * (-q) / (m * (m + 1))
        acc = acc + term
    return acc


def _series_y1(x):
    # Ascending series for Y1 with the harmonic-number correction
    # sum_k (-1)^k (H_k + H_{k+1}) (x/2)^{2k+1} / (k! (k+1)!).
    q = 0.25 * x * x
    t = 0.5 * x
    hs = 1.0
    s = t * hs
    for k in range(1, _SERIES_TERMS):
        t = t * (-q) / (k * (k + 1))
        hs += 1.0 / k + 1.0 / (k + 1)
        s = s + hs * t
    j1 = _series_j1(x)
    return (
        (2.0 / np.pi) * (np.log(0.5 * x) + EULER_GAMMA) * j1
        - 2.0 / (np.pi * x)
        - s / np.pi
    )


def _pq(mu: float, x):
    """Auxiliary series P(x), Q(x) of Hankel's expansion, each truncated
    per-element where its terms stop decreasing (optimal truncation)."""
    z2 = (8.0 * x) ** 2
    p = np.ones_like(x)
    pterm = np.ones_like(x)
    q = (mu - 1.0) / (8.0 * x) * np.ones_like(x)
    qterm = q
    active_p = np.ones_like(x, dtype=bool)
    active_q = np.ones_like(x, dtype=bool)
    for k in range(1, 20):
        f1 = (mu - (4 * k - 3) ** 2) * (mu - (4 * k - 1) ** 2)
        new_p = -pterm * f1 / ((2 * k - 1) * (2 * k) * z2)
        active_p = active_p & (np.abs(new_p) < np.abs(pterm))
        p = p + np.where(active_p, new_p, 0.0)
        pterm = np.where(active_p, new_p, pterm)

        f2 = (mu - (4 * k - 1) ** 2) * (mu - (4 * k + 1) ** 2)
        new_q = -qterm * f2 / ((2 * k) * (2 * k + 1) * z2)
        active_q = active_q & (np.abs(new_q) < np.abs(qterm))
        q = q + np.where(active_q, new_q, 0.0)
        qterm = np.where(active_q, new_q, qterm)
    return p, q


def _asymptotic(order: int, x):
    """Large-argument J and Y of integer order via Hankel's expansion."""
    mu = 4.0 * order * order
    p, q = _pq(mu, x)
    chi = x - (0.5 * order + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * x))
    j = amp * (p * np.cos(chi) - q * np.sin(chi))
    y = amp * (p * np.sin(chi) + q * np.cos(chi))
    return j, y


def _dispatch(x, series_fn, order: int, component: int):
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    lo = x < SWITCH
    if np.any(lo):
        out[lo] = series_fn(x[lo])
    hi = ~lo
    if np.any(hi):
        out[hi] = _asymptotic(order, x[hi])[component]
    return out[0] if scalar else out


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Accepts finite reals (scalars or arrays); J0 is even, so negative
    arguments are folded.  NaN input is rejected.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)):
        raise ValueError("bessel_j0: argument must be finite")
    return _dispatch(np.abs(arr), _series_j0, 0, 0)


def bessel_y0(x):
    """Bessel function of the second kind, order zero (x > 0)."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("bessel_y0: argument must be finite and positive")
    return _dispatch(arr, _series_y0, 0, 1)


def bessel_j1(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)):
        raise ValueError("bessel_j1: argument must be finite")
    sign = np.where(np.asarray(x) < 0, -1.0, 1.0)
    return _dispatch(np.abs(arr), _series_j1, 1, 0) * (
        sign if sign.ndim else float(sign)
    )


def bessel_y1(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("bessel_y1: argument must be finite and positive")
    return _dispatch(arr, _series_y1, 1, 1)


def hankel1_0(x):
    """H0^(1)(x) = J0(x) + i Y0(x) for x > 0."""
    return bessel_j0(x) + 1j * bessel_y0(x)


def hankel1_1(x):
    """H1^(1)(x) = J1(x) + i Y1(x) for x > 0."""
    return bessel_j1(x) + 1j * bessel_y1(x)
