"""Hermite oscillator functions and the quadrature identities built on them.

The basis used everywhere is the L^2-orthonormal family
phi_n(x) = e^{-x^2/2} p_n(x) with p_n the orthonormal Hermite polynomial,
generated by the three-term recurrence

    phi_{n+1}(x) = sqrt(2/(n+1)) x phi_n(x) - sqrt(n/(n+1)) phi_{n-1}(x).

Away from the classically allowed region the functions decay like a
Gaussian, so a plain-double recurrence flushes to zero long before the
allowed region of a high index is reached.  The block engine therefore
carries a per-point log offset that is renormalized on the fly; values are
returned either as plain doubles (fast path, small arguments) or as
(mantissa, log-offset) pairs that convert to :class:`ScaledReal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidArgumentError, QuadratureError
from .numerics import ScaledReal

_PI_QUARTER = math.pi ** -0.25
_RESCALE_HI = 1e120
_RESCALE_LO = 1e-120

_MAX_INDEX = 2000
_MAX_ARG = 1e4

__all__ = [
    "HermiteEval",
    "phi",
    "phi_prime",
    "hermite_eval",
    "overlap_reflect",
    "gue_projection_entry",
    "hermite_kernel_identity_residual",
]


@dataclass(frozen=True)
class HermiteEval:
    """Value and derivative of one oscillator function at one point."""

    n: int
    x: float
    value: ScaledReal
    derivative: ScaledReal


def _check_index(n: int):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise InvalidArgumentError("index must be an integer")
    if not 0 <= n <= _MAX_INDEX:
        raise InvalidArgumentError(f"index must be in 0..{_MAX_INDEX}, got {n}")


def _check_arg(x: float):
    if not (math.isfinite(x) and abs(x) <= _MAX_ARG):
        raise InvalidArgumentError(f"argument must be finite with |x| <= {_MAX_ARG:g}, got {x}")


def _phi_block_plain(nmax: int, x: np.ndarray) -> np.ndarray:
    """Rows 0..nmax of phi at the given points, plain doubles.

    Safe only while phi_0 = pi^{-1/4} e^{-x^2/2} is representable at the
    largest |x|, i.e. |x| below roughly 38; beyond that whole columns
    flush to zero and the scaled engine must be used instead.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1, x.size))
    with np.errstate(under="ignore"):
        out[0] = _PI_QUARTER * np.exp(-0.5 * x * x)
        if nmax >= 1:
            out[1] = math.sqrt(2.0) * x * out[0]
        for n in range(1, nmax):
            out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def _phi_block_scaled(nmax: int, x: np.ndarray):
    """Rows 0..nmax of phi as (mantissas, log offsets).

    The true value is ``vals[n, j] * exp(offs[n, j])``.  Neighbouring rows
    share a per-column offset which is renormalized whenever the running
    pair leaves [1e-120, 1e120], so the recurrence never over- or
    underflows regardless of index or argument.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    npts = x.size
    vals = np.empty((nmax + 1, npts))
    offs = np.empty((nmax + 1, npts))
    cur = np.full(npts, _PI_QUARTER)
    prev = np.zeros(npts)
    off = -0.5 * x * x
    vals[0] = cur
    offs[0] = off
    for n in range(nmax):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1.0)) * prev
        prev, cur = cur, nxt
        mag = np.maximum(np.abs(cur), np.abs(prev))
        mask = ((mag > _RESCALE_HI) | (mag < _RESCALE_LO)) & (mag > 0.0)
        if np.any(mask):
            adj = np.log(mag[mask])
            off = off.copy()
            off[mask] += adj
            scale = np.exp(-adj)
            cur[mask] *= scale
            prev[mask] *= scale
        vals[n + 1] = cur
        offs[n + 1] = off
    return vals, offs


def _scaled_to_scaledreal(val: float, off: float) -> ScaledReal:
    if val == 0.0:
        return ScaledReal(0, -math.inf)
    return ScaledReal(1 if val > 0 else -1, math.log(abs(val)) + off)


def phi(n: int, x: float) -> ScaledReal:
    """Orthonormal oscillator function phi_n(x) as a scaled real.

    Valid for 0 <= n <= 2000 and |x| <= 1e4; deep in the forbidden region
    the log magnitude keeps tracking the true Gaussian decay instead of
    flushing to zero.
    """
    _check_index(n)
    _check_arg(x)
    vals, offs = _phi_block_scaled(n, np.array([x]))
    return _scaled_to_scaledreal(float(vals[n, 0]), float(offs[n, 0]))


def phi_prime(n: int, x: float) -> ScaledReal:
    """Derivative phi_n'(x) via the ladder relation, as a scaled real."""
    _check_index(n)
    _check_arg(x)
    vals, offs = _phi_block_scaled(n + 1, np.array([x]))
    lo = math.sqrt(n / 2.0) * float(vals[n - 1, 0]) * math.exp(offs[n - 1, 0] - offs[n + 1, 0]) if n >= 1 else 0.0
    hi = math.sqrt((n + 1) / 2.0) * float(vals[n + 1, 0])
    # Both terms are expressed on the offset of row n+1 before combining.
    combined = lo - hi
    return _scaled_to_scaledreal(combined, float(offs[n + 1, 0]))


def hermite_eval(n: int, x: float) -> HermiteEval:
    """Bundle phi_n(x) and phi_n'(x) evaluated consistently."""
    return HermiteEval(n=n, x=float(x), value=phi(n, x), derivative=phi_prime(n, x))


def overlap_reflect(n: int, k: int, c: float) -> float:
    """Overlap of phi_n with phi_k reflected about c.

    Computes integral phi_n(x) phi_k(2c - x) dx by a Gauss-Hermite rule of
    order floor((n+k)/2) + 1 centred at c, which integrates the underlying
    degree-(n+k) polynomial exactly.  Valid for n, k in 0..1000 and
    |c| <= 100.  At c = 0 the value reduces to (-1)^n delta_{nk}.
    """
    _check_index(n)
    _check_index(k)
    if n > 1000 or k > 1000:
        raise InvalidArgumentError("overlap indices must be at most 1000")
    if not (math.isfinite(c) and abs(c) <= 100.0):
        raise InvalidArgumentError(f"reflection centre must satisfy |c| <= 100, got {c}")
    order = (n + k) // 2 + 1
    from .numerics import _hermite_rule_arrays

    u, _, wtil = _hermite_rule_arrays(order)
    nmax = max(n, k)
    a_vals, a_offs = _phi_block_scaled(nmax, c + u)
    b_vals, b_offs = _phi_block_scaled(nmax, c - u)
    with np.errstate(under="ignore"):
        terms = (
            a_vals[n]
            * b_vals[k]
            * np.exp(np.minimum(a_offs[n] + b_offs[k], 700.0))
            * wtil
        )
    return float(np.sum(terms))


def _panel_rule(order: int, a: float, b: float):
    from .numerics import _legendre_unit

    u, wu = _legendre_unit(order)
    return a + (b - a) * u, (b - a) * wu


def _gue_panel_order(n: int) -> int:
    # A width-1 panel sees up to sqrt(2n+1)/pi oscillations; Gauss-Legendre
    # needs a little over pi nodes per oscillation to converge spectrally.
    return max(24, int(3.6 * math.sqrt(2.0 * n + 1.0)) + 12)


def _gue_diagonal(indices: np.ndarray, s: float) -> np.ndarray:
    """Integrals of phi_n^2 over (s, inf) for every requested index at once."""
    nmax = int(np.max(indices))
    order = _gue_panel_order(nmax)
    x_turn = math.sqrt(2.0 * nmax + 1.0) + 2.0
    totals = np.zeros(nmax + 1)
    a = s
    panels = 0
    while True:
        b = a + 1.0
        nodes, w = _panel_rule(order, a, b)
        vals, offs = _phi_block_scaled(nmax, nodes)
        with np.errstate(under="ignore"):
            sq = (vals * np.exp(offs)) ** 2
        contrib = sq @ w
        totals += contrib
        a = b
        panels += 1
        if a >= x_turn and float(np.max(contrib)) < 1e-18:
            break
        if panels > 400:
            raise QuadratureError("projection diagonal did not converge within the panel budget")
    return totals[indices]


def gue_projection_entry(n: int, k: int, s: float) -> float:
    """Entry (n, k) of the Hermite projection kernel integrated over (s, inf).

    For n != k the integral of phi_n phi_k over (s, inf) collapses, via the
    oscillator equation, to the boundary Wronskian
    (phi_n'(s) phi_k(s) - phi_n(s) phi_k'(s)) / (2 (n - k)).  The diagonal
    has no such shortcut and is integrated by oscillation-resolving
    Gauss-Legendre panels with a Gaussian-tail stopping rule.  Valid for
    indices up to 1000 and |s| <= 100.
    """
    _check_index(n)
    _check_index(k)
    if n > 1000 or k > 1000:
        raise InvalidArgumentError("projection indices must be at most 1000")
    if not (math.isfinite(s) and abs(s) <= 100.0):
        raise InvalidArgumentError(f"threshold must satisfy |s| <= 100, got {s}")
    if n == k:
        return float(_gue_diagonal(np.array([n]), s)[0])
    fn = hermite_eval(n, s)
    fk = hermite_eval(k, s)
    w = (fn.derivative * fk.value, -(fn.value * fk.derivative))
    # The two products share the scale e^{-s^2}; combine in float after
    # removing it, which is safe for |s| <= 100 thanks to the offsets.
    shift = max(w[0].log_mag, w[1].log_mag)
    if shift == -math.inf:
        return 0.0
    combined = sum(t.sign * math.exp(t.log_mag - shift) for t in w)
    value = combined * math.exp(min(shift, 700.0)) if shift > -700.0 else 0.0
    return value / (2.0 * (n - k))


def hermite_kernel_identity_residual(n_terms: int, t: float, x: float, y: float) -> float:
    """Residual of the integral representation of the weighted projection kernel.

    Compares sum_{n < n_terms} e^{t n} phi_n(x) phi_n(y) against its
    contour-collapsed form

        sqrt(n_terms/2) e^{t (n_terms - 1/2)} integral_0^inf dz
            e^{-s(t) ((x+y) z + c(t) z^2)}
            [phi_N(x + c z) phi_{N-1}(y + c z) + phi_{N-1}(x + c z) phi_N(y + c z)]

    with s(t) = sinh(t/2), c(t) = cosh(t/2) and N = n_terms.  Returns the
    absolute difference.  Valid for 1 <= n_terms <= 100, |t| <= 2 and
    |x|, |y| <= 30; at t = 0 this is the classical integral form of the
    Christoffel-Darboux kernel.
    """
    if not isinstance(n_terms, (int, np.integer)) or isinstance(n_terms, bool):
        raise InvalidArgumentError("n_terms must be an integer")
    if not 1 <= n_terms <= 100:
        raise InvalidArgumentError(f"n_terms must be in 1..100, got {n_terms}")
    if not (math.isfinite(t) and abs(t) <= 2.0):
        raise InvalidArgumentError(f"weight exponent must satisfy |t| <= 2, got {t}")
    for v in (x, y):
        if not (math.isfinite(v) and abs(v) <= 30.0):
            raise InvalidArgumentError(f"arguments must satisfy |x|, |y| <= 30, got {v}")

    N = int(n_terms)
    px = _phi_block_plain(N, np.array([x]))[:, 0]
    py = _phi_block_plain(N, np.array([y]))[:, 0]
    lhs = float(np.sum(np.exp(t * np.arange(N)) * px[:N] * py[:N]))

    s_t = math.sinh(0.5 * t)
    c_t = math.cosh(0.5 * t)
    # Map scale so that roughly half the nodes cover the region where the
    # shifted oscillator functions still oscillate.
    z_star = (math.sqrt(2.0 * N + 1.0) - min(x, y) + 4.0) / c_t
    from .numerics import _gl_mapped_arrays

    nodes, w = _gl_mapped_arrays(320, max(2.0, z_star))
    ax_vals, ax_offs = _phi_block_scaled(N, x + c_t * nodes)
    ay_vals, ay_offs = _phi_block_scaled(N, y + c_t * nodes)

    def log_abs(vals, offs, row):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(vals[row])) + offs[row]

    expo = -s_t * ((x + y) * nodes + c_t * nodes * nodes)
    la1 = log_abs(ax_vals, ax_offs, N) + log_abs(ay_vals, ay_offs, N - 1)
    la2 = log_abs(ax_vals, ax_offs, N - 1) + log_abs(ay_vals, ay_offs, N)
    sg1 = np.sign(ax_vals[N]) * np.sign(ay_vals[N - 1])
    sg2 = np.sign(ax_vals[N - 1]) * np.sign(ay_vals[N])
    logs = np.concatenate([expo + la1, expo + la2])
    signs = np.concatenate([sg1, sg2])
    wts = np.concatenate([w, w])
    finite = np.isfinite(logs)
    if not np.any(finite):
        integral = 0.0
    else:
        peak = float(np.max(logs[finite]))
        with np.errstate(under="ignore"):
            acc = float(np.sum(wts[finite] * signs[finite] * np.exp(logs[finite] - peak)))
        integral = acc * math.exp(peak) if peak > -700.0 else 0.0
    rhs = math.sqrt(N / 2.0) * math.exp(t * (N - 0.5)) * integral
    return abs(lhs - rhs)
