"""Vectorized double-double arithmetic.

A double-double value represents a real number as an unevaluated sum
``hi + lo`` of two floats with ``|lo| <= ulp(hi)/2``, giving roughly 32
significant digits.  All routines below act elementwise on numpy arrays
(or scalars) and are built from the classic error-free transforms of
Dekker and Knuth, written without fused multiply-adds so they behave the
same on every platform.

Only the operations needed elsewhere in the package are provided: ring
arithmetic, division, square root, and a short exponential good to about
1e-16 relative, which is all the extended determinant path requires.
"""

from __future__ import annotations

import numpy as np

# Splitter constant 2^27 + 1 for Dekker's product; valid while the split
# operand stays below about 2^996, which every caller in this package
# respects (largest internal magnitudes are near e^600 ~ 2^866).
_SPLIT = 134217729.0

Pair = tuple[np.ndarray, np.ndarray]


def from_float(x) -> Pair:
    """Promote a float array to an exact double-double pair."""
    hi = np.asarray(x, dtype=float)
    return hi, np.zeros_like(hi)


def to_float(x: Pair) -> np.ndarray:
    """Round a double-double pair back to ordinary floats."""
    return x[0] + x[1]


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _quick_two_sum(a, b):
    # Requires |a| >= |b|; cheaper than _two_sum.
    s = a + b
    err = b - (s - a)
    return s, err


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    lo = a - hi
    return hi, lo


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def add(x: Pair, y: Pair) -> Pair:
    s1, s2 = _two_sum(x[0], y[0])
    t1, t2 = _two_sum(x[1], y[1])
    s2 = s2 + t1
    s1, s2 = _quick_two_sum(s1, s2)
    s2 = s2 + t2
    return _quick_two_sum(s1, s2)


def add_f(x: Pair, y) -> Pair:
    """Add a plain float array to a double-double pair."""
    s1, s2 = _two_sum(x[0], np.asarray(y, dtype=float))
    s2 = s2 + x[1]
    return _quick_two_sum(s1, s2)


def neg(x: Pair) -> Pair:
    return -x[0], -x[1]


def sub(x: Pair, y: Pair) -> Pair:
    return add(x, neg(y))


def mul(x: Pair, y: Pair) -> Pair:
    p1, p2 = _two_prod(x[0], y[0])
    p2 = p2 + (x[0] * y[1] + x[1] * y[0])
    return _quick_two_sum(p1, p2)


def mul_f(x: Pair, y) -> Pair:
    """Multiply a double-double pair by a plain float array."""
    yf = np.asarray(y, dtype=float)
    p1, p2 = _two_prod(x[0], yf)
    p2 = p2 + x[1] * yf
    return _quick_two_sum(p1, p2)


def div(x: Pair, y: Pair) -> Pair:
    # Two rounds of Newton-style correction on the float quotient.
    q1 = x[0] / y[0]
    r = sub(x, mul_f(y, q1))
    q2 = r[0] / y[0]
    r = sub(r, mul_f(y, q2))
    q3 = r[0] / y[0]
    s, e = _quick_two_sum(q1, q2)
    return add_f((s, e), q3)


def sqrt(x: Pair) -> Pair:
    # Karp's trick: float square root plus one half-step of Newton in dd.
    s = np.sqrt(x[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = sub(x, mul((s, np.zeros_like(s)), (s, np.zeros_like(s))))
        corr = np.where(s > 0.0, r[0] / (2.0 * s), 0.0)
    return _quick_two_sum(s, corr)


def exp(x: Pair) -> Pair:
    """Elementwise exponential, about 1e-16 relative accuracy.

    The high word goes through the libm exponential and the low word is
    folded in by its quadratic Taylor polynomial.  That limits accuracy to
    roughly one double ulp, which is enough for the balanced determinant
    path where these factors multiply quantities already carried in dd.
    """
    eh = np.exp(x[0])
    corr = x[1] * (1.0 + 0.5 * x[1])
    return add(mul_f((eh, np.zeros_like(eh)), 1.0), mul_f((eh, np.zeros_like(eh)), corr))


def dot(x: Pair, y: Pair, axis: int = -1) -> Pair:
    """Inner product along an axis, fully in double-double."""
    return total(mul(x, y), axis=axis)


def total(x: Pair, axis: int = -1) -> Pair:
    """Sum along an axis by pairwise reduction, fully in double-double."""
    hi = np.moveaxis(np.asarray(x[0], dtype=float), axis, 0)
    lo = np.moveaxis(np.asarray(x[1], dtype=float), axis, 0)
    n = hi.shape[0]
    if n == 0:
        return np.zeros(hi.shape[1:]), np.zeros(hi.shape[1:])
    while n > 1:
        half = n // 2
        a = (hi[:half], lo[:half])
        b = (hi[half : 2 * half], lo[half : 2 * half])
        shi, slo = add(a, b)
        if n % 2:
            hi = np.concatenate([shi, hi[2 * half : n]], axis=0)
            lo = np.concatenate([slo, lo[2 * half : n]], axis=0)
        else:
            hi, lo = shi, slo
        n = hi.shape[0]
    return hi[0], lo[0]
