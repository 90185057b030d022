"""Laws of the top-path maximum and of the location where it is attained.

The cumulative law of the maximum is det(I - M) with M the reflection
operator from :mod:`nibm.finite_kernels`.  The joint density of height m
and location t adds a rank-one update with vectors whose components carry
the factor e^{-n tau}, tau = log(t/(1-t))/2.  Away from t = 1/2 that
factor spans hundreds of orders of magnitude, so the density is assembled
in a balanced form: with D = diag(e^{n_j tau/2}) the two triangular solves
use the conjugated factors D L D^{-1} and D^{-1} L D, whose entries stay
representable, while the overall amplitudes ride along as exponents.
Plain doubles carry this to a predicted dynamic range of 1e14; past that
the factorization switches to the double-double mirror, and past
|tau| * N = 600 the point is refused as outside the supported window.

Location marginals and tail probabilities integrate the joint density
over a moving height window centred on the typical top-path height at the
given time, with panels on a fixed lattice so operator factorizations are
reused across times.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import dd
from ._errors import (
    InvalidArgumentError,
    PrecisionWindowError,
    SeriesTooSlowError,
    SingularMatrixError,
)
from .finite_kernels import ModelKind, _coerce_model, build_gue_projection, build_operator, build_psi_pair
from .numerics import SquareMatrix, _cholesky_dd, _cholesky_plain, det_lu, sym_eigen

_LOG = logging.getLogger(__name__)

# Image-series envelope of the upper tail of the argmax law, and the two
# epsilon thresholds between which the matching lower bound is known.
ENVELOPE_RATE = 32.0 / 3.0
EPSILON_SMALL = 0.5 * math.tanh(1.0 / 3.0)
EPSILON_LARGE = 0.5 * math.tanh(1.0)

_PLAIN_RANGE_LOG = math.log(1e14)
_TAU_N_LIMIT = 600.0
_NEG_CLIP = -1e-7
# Assembly accepts a value only when it clears the rounding-noise floor
# of its arithmetic mode by two orders of magnitude.  The triangular
# solves against I - M scale roundoff by the inverse determinant, so a
# trace below eps / det(I - M) carries no information; reporting zero
# there is accurate to the resolution the mode can certify.
_NOISE_MARGIN = 4.6
_LOG_EPS_PLAIN = -53.0 * math.log(2.0)
_LOG_EPS_DD = -104.0 * math.log(2.0)

__all__ = [
    "ENVELOPE_RATE",
    "EPSILON_SMALL",
    "EPSILON_LARGE",
    "JointDensityGrid",
    "TailEnvelopeReport",
    "max_cdf",
    "loe_cdf",
    "gue_cdf",
    "gue_tail_neglog",
    "joint_density",
    "argmax_marginal",
    "argmax_tail",
    "tail_envelope_report",
    "joint_density_grid",
]


@dataclass(frozen=True)
class JointDensityGrid:
    """Tabulated joint density with its own normalization diagnostic.

    ``values[i, j]`` is the density at ``(m_grid[i], t_grid[j])``.  The
    normalization defect is |1 - total mass| where the mass is computed by
    the adaptive quadrature of the evaluator over the full support, not by
    summing this table, so a coarse display grid does not degrade it.
    """

    model: ModelKind
    n_paths: int
    m_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    normalization_defect: float


@dataclass(frozen=True)
class TailEnvelopeReport:
    """Measured argmax tail probabilities against the cubic envelope.

    ``envelope_rate[i]`` is -log P(|T - 1/2| > eps_i) divided by
    N eps_i^3; the upper envelope constant for bridges is 32/3 up to a
    relative correction that decays like N^{-1/3}.  ``rate_flags`` marks
    epsilons whose measured rate exceeds the inflated envelope
    (32/3) (1 + 3 N^{-1/3}); ``envelope_consistent`` is True when none do.
    """

    n_paths: int
    epsilons: tuple[float, ...]
    probabilities: tuple[float, ...]
    neg_log_probabilities: tuple[float, ...]
    envelope_rate: tuple[float, ...]
    upper_rate_constant: float
    small_eps_threshold: float
    large_eps_threshold: float
    rate_flags: tuple[bool, ...]
    envelope_consistent: bool


def _check_n(n_paths: int, cap: int):
    if not isinstance(n_paths, (int, np.integer)) or isinstance(n_paths, bool):
        raise InvalidArgumentError("n_paths must be an integer")
    if not 1 <= n_paths <= cap:
        raise InvalidArgumentError(f"n_paths must be in 1..{cap}, got {n_paths}")


def max_cdf(model, n_paths: int, m: float, tol: float = 1e-14) -> float:
    """P(top-path maximum <= m) for the requested ensemble.

    Returns 0.0 for m <= 0.  For the half-line models, heights so small
    that the reflection series cannot reach ``tol`` are also reported as
    0.0, which is where the true value sits at double precision anyway.
    """
    model = _coerce_model(model)
    _check_n(n_paths, 300)
    if not math.isfinite(m):
        raise InvalidArgumentError(f"height must be finite, got {m}")
    if m <= 0.0:
        return 0.0
    barrier = math.sqrt(2.0) * m
    if barrier >= 45.0:
        # Every operator entry is below e^{-2000}; the determinant is 1.
        return 1.0
    try:
        op = build_operator(model, n_paths, barrier, tol)
    except SeriesTooSlowError:
        return 0.0
    a = np.eye(n_paths) - op.entries.entries
    det = det_lu(SquareMatrix.from_array(a))
    if -1e-12 < det < 0.0:
        det = 0.0
    elif 1.0 < det < 1.0 + 1e-12:
        det = 1.0
    return det


def loe_cdf(n_paths: int, x: float) -> float:
    """CDF of the largest eigenvalue of the order-N Laguerre orthogonal ensemble.

    The eigenvalue scale matches Wishart matrices built from (N+1) x N
    standard Gaussians.  The value is the bridge-ensemble determinant at
    barrier sqrt(x/2); non-positive x gives 0.0.
    """
    _check_n(n_paths, 300)
    if not math.isfinite(x):
        raise InvalidArgumentError(f"threshold must be finite, got {x}")
    if x <= 0.0:
        return 0.0
    return max_cdf(ModelKind.BB, n_paths, math.sqrt(x / 2.0) / math.sqrt(2.0))


def gue_cdf(n_paths: int, s: float) -> float:
    """P(largest GUE eigenvalue <= s) at matrix size N.

    Uses the projection-kernel determinant; the Gaussian convention has
    off-diagonal entries of variance 1 (diagonal 2) before scaling, so
    the spectrum fills (-sqrt(2N), sqrt(2N)) at large N.
    """
    _check_n(n_paths, 300)
    op = build_gue_projection(n_paths, s)
    a = np.eye(n_paths) - op.entries.entries
    det = det_lu(SquareMatrix.from_array(a))
    if -1e-12 < det < 0.0:
        det = 0.0
    elif 1.0 < det < 1.0 + 1e-12:
        det = 1.0
    return det


def gue_tail_neglog(n_paths: int, s: float) -> float:
    """-log P(largest GUE eigenvalue > s), stable deep in the right tail.

    Goes through the eigenvalues of the projection matrix: with those in
    [0, 1), log CDF = sum log1p(-lambda) and the tail follows from expm1,
    so values like 1e-40 survive where 1 - det would round to zero.
    """
    _check_n(n_paths, 300)
    op = build_gue_projection(n_paths, s)
    lam, _ = sym_eigen(op.entries)
    lam = np.clip(lam, 0.0, 1.0 - 1e-16)
    log_cdf = float(np.sum(np.log1p(-lam)))
    tail = -math.expm1(log_cdf)
    if tail <= 0.0:
        # CDF rounded to 1 even through the eigenvalue route; the first
        # order term of expm1 is then the tail itself.
        return -log_cdf if log_cdf < 0.0 else math.inf
    return -math.log(tail)


def _tau_of(t: float) -> float:
    return 0.5 * math.log(t / (1.0 - t))


class _FactoredOperator:
    """I - M at one height, with lazily built plain and dd Cholesky factors."""

    def __init__(self, model: ModelKind, n_paths: int, m: float, tol: float):
        op = build_operator(model, n_paths, math.sqrt(2.0) * m, tol)
        self.a = np.eye(n_paths) - op.entries.entries
        self.indices = model.hermite_indices(n_paths).astype(float)
        self._chol_plain = None
        self._chol_dd = None

    def chol_plain(self):
        if self._chol_plain is None:
            L = _cholesky_plain(self.a)
            self._chol_plain = (L, 2.0 * float(np.sum(np.log(np.diag(L)))))
        return self._chol_plain

    def chol_dd(self):
        if self._chol_dd is None:
            Lh, Ll = _cholesky_dd(self.a, np.zeros_like(self.a))
            self._chol_dd = (Lh, Ll, 2.0 * float(np.sum(np.log(np.diag(Lh)))))
        return self._chol_dd


def _psi_arrays(psi) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    su = np.array([float(c.sign) for c in psi.u])
    lu = np.array([c.log_mag for c in psi.u])
    sv = np.array([float(c.sign) for c in psi.v])
    lv = np.array([c.log_mag for c in psi.v])
    return su, lu, sv, lv


def _trace_log_density(fop: _FactoredOperator, psi, tau: float, mode: str) -> tuple[float, float]:
    """(sign, log magnitude) of the rank-one trace times the determinant."""
    idx = fop.indices
    su, lu, sv, lv = _psi_arrays(psi)
    lp = lu + idx * (tau / 2.0)
    lq = lv - idx * (tau / 2.0)
    ap = float(np.max(lp))
    aq = float(np.max(lq))
    if not (math.isfinite(ap) and math.isfinite(aq)):
        return 0.0, -math.inf
    with np.errstate(under="ignore"):
        p = su * np.exp(lp - ap)
        q = sv * np.exp(lq - aq)
    n = idx.size
    # E[i, j] = e^{(n_i - n_j) tau / 2}; bounded by e^600 inside the window.
    with np.errstate(under="ignore"):
        E = np.exp(np.subtract.outer(idx, idx) * (tau / 2.0))
    if mode == "plain":
        L, logdet = fop.chol_plain()
        G = L * E
        H = L * E.T
        z = np.empty(n)
        w = np.empty(n)
        for i in range(n):
            z[i] = (p[i] - G[i, :i] @ z[:i]) / L[i, i]
            w[i] = (q[i] - H[i, :i] @ w[:i]) / L[i, i]
        trace = float(w @ z)
    else:
        Lh, Ll, logdet = fop.chol_dd()
        zh = np.zeros(n)
        zl = np.zeros(n)
        wh = np.zeros(n)
        wl = np.zeros(n)
        for i in range(n):
            row = (Lh[i, :i], Ll[i, :i])
            ge = dd.mul_f(row, E[i, :i])
            he = dd.mul_f(row, E.T[i, :i])
            sz = dd.total(dd.mul(ge, (zh[:i], zl[:i])), axis=0) if i else (0.0, 0.0)
            sw = dd.total(dd.mul(he, (wh[:i], wl[:i])), axis=0) if i else (0.0, 0.0)
            piv = (Lh[i, i], Ll[i, i])
            zi = dd.div(dd.add_f((np.asarray(-sz[0]), np.asarray(-sz[1])), p[i]), piv)
            wi = dd.div(dd.add_f((np.asarray(-sw[0]), np.asarray(-sw[1])), q[i]), piv)
            zh[i], zl[i] = float(zi[0]), float(zi[1])
            wh[i], wl[i] = float(wi[0]), float(wi[1])
        trace = float(dd.to_float(dd.dot((wh, wl), (zh, zl), axis=0)))
    if trace == 0.0:
        return 0.0, -math.inf
    log_eps = _LOG_EPS_PLAIN if mode == "plain" else _LOG_EPS_DD
    if math.log(abs(trace)) + logdet < log_eps + _NOISE_MARGIN:
        return 0.0, -math.inf
    return math.copysign(1.0, trace), ap + aq + math.log(abs(trace)) + logdet


def _det_unpivoted_conjugated(a: np.ndarray) -> tuple[float, float]:
    """(sign, log|det|) by elimination without pivoting.

    Used on diagonally conjugated matrices whose row swaps would break
    the balancing; the unconjugated matrix is close to SPD so the pivot
    sequence is safe.
    """
    a = a.copy()
    n = a.shape[0]
    sign = 1.0
    log_mag = 0.0
    for k in range(n):
        piv = a[k, k]
        if piv == 0.0:
            raise SingularMatrixError(k, "zero pivot in unpivoted elimination")
        if piv < 0.0:
            sign = -sign
        log_mag += math.log(abs(piv))
        if k + 1 < n:
            mult = a[k + 1 :, k] / piv
            a[k + 1 :, k + 1 :] -= np.outer(mult, a[k, k + 1 :])
    return sign, log_mag


def _difference_log_density(fop: _FactoredOperator, psi, tau: float, mode: str) -> tuple[float, float]:
    """Determinant-difference form of the same density, for cross-checks.

    Subtracting two determinants loses the rank-one contribution once it
    falls below the rounding scale of det(I - M); deep in the tails this
    route honestly returns zero while the trace route keeps digits.
    """
    idx = fop.indices
    su, lu, sv, lv = _psi_arrays(psi)
    if mode == "plain":
        with np.errstate(under="ignore"):
            u = su * np.exp(lu)
            v = sv * np.exp(lv)
        d0 = det_lu(SquareMatrix.from_array(fop.a))
        d1 = det_lu(SquareMatrix.from_array(fop.a + np.outer(u, v)))
        diff = d1 - d0
        if diff == 0.0 or abs(diff) < math.exp(_LOG_EPS_PLAIN + _NOISE_MARGIN) * max(abs(d0), abs(d1)):
            return 0.0, -math.inf
        return math.copysign(1.0, diff), math.log(abs(diff))
    lp = lu + idx * (tau / 2.0)
    lq = lv - idx * (tau / 2.0)
    ap = float(np.max(lp))
    aq = float(np.max(lq))
    if not (math.isfinite(ap) and math.isfinite(aq)):
        return 0.0, -math.inf
    if ap + aq > 600.0:
        raise PrecisionWindowError("rank-one amplitude outside the representable window")
    with np.errstate(under="ignore"):
        p = su * np.exp(lp - ap)
        q = sv * np.exp(lq - aq)
        E = np.exp(np.subtract.outer(idx, idx) * (tau / 2.0))
    conj = fop.a * E
    s0, l0 = _det_unpivoted_conjugated(conj)
    amp = math.exp(ap + aq)
    s1, l1 = _det_unpivoted_conjugated(conj + amp * np.outer(p, q))
    peak = max(l0, l1)
    diff = s1 * math.exp(l1 - peak) - s0 * math.exp(l0 - peak)
    if diff == 0.0 or math.log(abs(diff)) < _LOG_EPS_PLAIN + _NOISE_MARGIN:
        return 0.0, -math.inf
    return math.copysign(1.0, diff), math.log(abs(diff)) + peak


class _DensityEvaluator:
    """Shared machinery for one (model, n_paths): caches and quadratures.

    The height window for marginals follows the typical top-path profile:
    at location t the conditional maximum concentrates near
    centre * 2 sqrt(t (1 - t)) = centre / cosh(tau), and the window and
    node spacing shrink by the same factor, so a fixed-order rule keeps
    resolving the bump arbitrarily close to the ends of the interval.
    """

    _TAU_PANEL = 0.4

    def __init__(self, model: ModelKind, n_paths: int, tol: float = 1e-13):
        self.model = model
        self.n = n_paths
        self.tol = tol
        self.centre = math.sqrt(n_paths) if model is ModelKind.BB else math.sqrt(2.0 * n_paths)
        if model is ModelKind.BB:
            self.sigma = 0.5 * n_paths ** (-1.0 / 6.0)
            self.floor = 1e-6
        else:
            self.sigma = 2.0 ** (-7.0 / 6.0) * n_paths ** (-1.0 / 6.0)
            # Below this height the half-line CDFs sit under e^{-300} and
            # the reflection series would be needlessly long.
            self.floor = 0.06
        self._ops: OrderedDict[float, _FactoredOperator] = OrderedDict()
        self._marginals: OrderedDict[float, float] = OrderedDict()
        self._aligned: dict[int, float] = {}

    def _op(self, m: float) -> _FactoredOperator:
        key = float(m)
        if key in self._ops:
            self._ops.move_to_end(key)
            return self._ops[key]
        fop = _FactoredOperator(self.model, self.n, key, 1e-14)
        self._ops[key] = fop
        if len(self._ops) > 700:
            self._ops.popitem(last=False)
        return fop

    def _window_mode(self, tau: float) -> str:
        idx_max = float(self.model.hermite_indices(self.n)[-1])
        if abs(tau) * self.n > _TAU_N_LIMIT:
            raise PrecisionWindowError(
                f"|tau| * N = {abs(tau) * self.n:.1f} exceeds the supported window of {_TAU_N_LIMIT:g}"
            )
        return "dd" if abs(tau) * idx_max > _PLAIN_RANGE_LOG else "plain"

    def density(self, m: float, t: float, method: str = "trace") -> float:
        tau = _tau_of(t)
        mode = self._window_mode(tau)
        if self.model is not ModelKind.BB and m <= self.floor:
            # The CDF at such heights is below e^{-300}; so is the density.
            return 0.0
        try:
            fop = self._op(m)
        except SeriesTooSlowError:
            return 0.0
        if mode == "plain":
            # Small determinants mean the resolvent magnifies rounding by
            # e^{|log det|}; past ~e20 of that, plain doubles return pure
            # cancellation noise, while the double-double path still
            # resolves true values down to the underflow floor.
            try:
                _, logdet = fop.chol_plain()
                if logdet < -20.0:
                    mode = "dd"
            except SingularMatrixError:
                mode = "dd"
        psi = build_psi_pair(self.model, self.n, m, t, self.tol)
        try:
            if method == "trace":
                sign, log_mag = _trace_log_density(fop, psi, tau, mode)
            else:
                sign, log_mag = _difference_log_density(fop, psi, tau, mode)
        except SingularMatrixError:
            # I - M numerically lost positive definiteness, which only
            # happens when the CDF at this height is below ~1e-250; the
            # density there is far below double resolution.
            return 0.0
        if sign == 0.0 or log_mag < -740.0:
            value = 0.0
        else:
            value = sign * math.exp(log_mag)
        if self.model is not ModelKind.BB:
            value *= 0.5
        if value < 0.0:
            if value >= _NEG_CLIP:
                return 0.0
            _LOG.warning(
                "joint density %.3e at (m=%.6g, t=%.6g, model=%s, N=%d) below the clipping floor",
                value,
                m,
                t,
                self.model.value,
                self.n,
            )
        return value

    def _height_integral(self, t: float, lo: float, hi: float, order: int = 44) -> tuple[float, float]:
        """Integral of the density over [lo, hi] and the largest node value."""
        from .numerics import _legendre_unit

        if hi <= lo:
            return 0.0, 0.0
        u, wu = _legendre_unit(order)
        nodes = lo + (hi - lo) * u
        vals = np.array([max(self.density(float(m), t), 0.0) for m in nodes])
        return float((hi - lo) * (wu @ vals)), float(np.max(vals))

    def marginal(self, t: float) -> float:
        key = float(t)
        if key in self._marginals:
            self._marginals.move_to_end(key)
            return self._marginals[key]
        tau = _tau_of(key)
        self._window_mode(tau)  # raises outside the precision window
        kappa = 1.0 / math.cosh(tau)
        c_t = self.centre * kappa
        # Conservative local scale: proportional shrinking covers both the
        # order-one relative width at N = 1 and the narrower edge
        # fluctuations at large N.
        s_t = self.sigma * kappa
        lo = max(self.floor, c_t - 7.0 * s_t)
        hi = c_t + 7.0 * s_t
        if hi <= self.floor:
            self._store_marginal(key, 0.0)
            return 0.0
        total, peak = self._height_integral(key, lo, hi)
        # Expand outward in window-sized steps while the edges still carry
        # weight relative to the local peak.
        guard = 0
        while lo > self.floor and guard < 60:
            step_lo = max(self.floor, lo - 3.0 * s_t)
            piece, piece_peak = self._height_integral(key, step_lo, lo, order=16)
            total += piece
            lo = step_lo
            peak = max(peak, piece_peak)
            guard += 1
            if piece_peak <= 1e-14 * peak:
                break
        guard = 0
        while guard < 60:
            step_hi = hi + 3.0 * s_t
            piece, piece_peak = self._height_integral(key, hi, step_hi, order=16)
            total += piece
            hi = step_hi
            peak = max(peak, piece_peak)
            guard += 1
            if piece_peak <= 1e-14 * peak:
                break
        self._store_marginal(key, total)
        return total

    def _store_marginal(self, key: float, value: float):
        self._marginals[key] = value
        if len(self._marginals) > 4096:
            self._marginals.popitem(last=False)

    def _marginal_tau(self, tau: float) -> float:
        t = 0.5 * (1.0 + math.tanh(tau))
        if t >= 1.0:
            return 0.0
        return self.marginal(t) / (2.0 * math.cosh(tau) ** 2)

    def _tau_piece(self, a: float, b: float) -> float:
        from .numerics import _legendre_unit

        u, wu = _legendre_unit(10)
        nodes = a + (b - a) * u
        vals = np.array([self._marginal_tau(float(x)) for x in nodes])
        return float((b - a) * (wu @ vals))

    def _aligned_panel(self, k: int) -> float:
        if k not in self._aligned:
            w = self._TAU_PANEL
            self._aligned[k] = self._tau_piece(k * w, (k + 1) * w)
        return self._aligned[k]

    def _tau_quadrature(self, tau_start: float) -> float:
        """Integral of the location marginal in t from t(tau_start) up to 1.

        Panels are aligned on a fixed lattice so their values can be
        cached and shared between different starting points; only the
        fractional first piece is integrated per call.
        """
        w = self._TAU_PANEL
        k0 = int(math.floor(tau_start / w + 1e-12))
        total = 0.0
        aligned_from = k0
        if tau_start > k0 * w + 1e-12:
            total += self._tau_piece(tau_start, (k0 + 1) * w)
            aligned_from = k0 + 1
        quiet = 0
        k = aligned_from
        while (k + 1) * w * self.n <= _TAU_N_LIMIT:
            piece = self._aligned_panel(k)
            total += piece
            if piece < 1e-15 * max(total, 1e-300):
                quiet += 1
                if quiet >= 2:
                    break
            else:
                quiet = 0
            k += 1
        return total

    def tail(self, epsilon: float) -> float:
        tau0 = math.atanh(2.0 * epsilon)
        value = 2.0 * self._tau_quadrature(tau0)
        return min(max(value, 0.0), 1.0)

    def total_mass(self) -> float:
        return 2.0 * self._tau_quadrature(0.0)


_EVALUATORS: OrderedDict[tuple, _DensityEvaluator] = OrderedDict()


def _evaluator(model: ModelKind, n_paths: int, tol: float = 1e-13) -> _DensityEvaluator:
    _check_n(n_paths, 300)
    key = (model, n_paths, tol)
    if key in _EVALUATORS:
        _EVALUATORS.move_to_end(key)
        return _EVALUATORS[key]
    ev = _DensityEvaluator(model, n_paths, tol)
    _EVALUATORS[key] = ev
    if len(_EVALUATORS) > 8:
        _EVALUATORS.popitem(last=False)
    return ev


def joint_density(model, n_paths: int, m: float, t: float, method: str = "trace", tol: float = 1e-13) -> float:
    """Joint density of (maximum height, its location) at one point.

    ``method`` selects the primary balanced trace evaluation or the
    determinant-difference cross-check; the two agree wherever the
    rank-one term is not below the rounding scale of the determinant.
    Raises :class:`PrecisionWindowError` when |tau| * N > 600 with
    tau = log(t/(1-t))/2.
    """
    model = _coerce_model(model)
    _check_n(n_paths, 200)
    if method not in ("trace", "difference"):
        raise InvalidArgumentError(f"method must be 'trace' or 'difference', got {method!r}")
    if not (math.isfinite(m) and 0.0 < m <= 100.0):
        raise InvalidArgumentError(f"height must lie in (0, 100], got {m}")
    if not 0.0 < t < 1.0:
        raise InvalidArgumentError(f"location must lie strictly inside (0, 1), got {t}")
    return _evaluator(model, n_paths, tol).density(float(m), float(t), method)


def argmax_marginal(model, n_paths: int, t: float, tol: float = 1e-13) -> float:
    """Density of the location of the top-path maximum at time t.

    Integrates the joint density over height on an adaptive window that
    follows the typical top-path profile.  Symmetric about t = 1/2; times
    outside the precision window raise :class:`PrecisionWindowError`.
    """
    model = _coerce_model(model)
    _check_n(n_paths, 200)
    if not 0.0 < t < 1.0:
        raise InvalidArgumentError(f"location must lie strictly inside (0, 1), got {t}")
    return _evaluator(model, n_paths, tol).marginal(float(t))


def argmax_tail(model, n_paths: int, epsilon: float, tol: float = 1e-13) -> float:
    """P(|T - 1/2| > epsilon) for the location T of the top-path maximum.

    Twice the integral of the location marginal over (1/2 + epsilon, 1),
    by symmetry.  ``epsilon`` must lie in (0, 1/2).
    """
    model = _coerce_model(model)
    _check_n(n_paths, 200)
    if not (math.isfinite(epsilon) and 0.0 < epsilon < 0.5):
        raise InvalidArgumentError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    return _evaluator(model, n_paths, tol).tail(float(epsilon))


def tail_envelope_report(n_paths: int, epsilons, tol: float = 1e-13) -> TailEnvelopeReport:
    """Compare measured bridge argmax tails with the cubic envelope.

    Valid for epsilons strictly between 0 and the threshold tanh(1)/2
    beyond which the envelope pair is not established.  The flagged rate
    threshold inflates 32/3 by (1 + 3 N^{-1/3}) to absorb the known
    finite-N correction of relative order N^{-1/3}.
    """
    _check_n(n_paths, 200)
    eps = tuple(float(e) for e in epsilons)
    if not eps:
        raise InvalidArgumentError("at least one epsilon is required")
    for e in eps:
        if not (math.isfinite(e) and 0.0 < e < EPSILON_LARGE):
            raise InvalidArgumentError(
                f"epsilon must lie in (0, {EPSILON_LARGE:.6f}) for the envelope comparison, got {e}"
            )
    probs = []
    neglogs = []
    rates = []
    flags = []
    threshold = ENVELOPE_RATE * (1.0 + 3.0 * n_paths ** (-1.0 / 3.0))
    for e in eps:
        p = argmax_tail(ModelKind.BB, n_paths, e, tol)
        nl = -math.log(p) if p > 0.0 else math.inf
        rate = nl / (n_paths * e**3)
        probs.append(p)
        neglogs.append(nl)
        rates.append(rate)
        flags.append(bool(rate > threshold))
    return TailEnvelopeReport(
        n_paths=n_paths,
        epsilons=eps,
        probabilities=tuple(probs),
        neg_log_probabilities=tuple(neglogs),
        envelope_rate=tuple(rates),
        upper_rate_constant=ENVELOPE_RATE,
        small_eps_threshold=EPSILON_SMALL,
        large_eps_threshold=EPSILON_LARGE,
        rate_flags=tuple(flags),
        envelope_consistent=not any(flags),
    )


def _auto_m_grid(ev: _DensityEvaluator) -> np.ndarray:
    lo = max(ev.floor, ev.centre - 6.0 * ev.sigma)
    hi = ev.centre + 6.0 * ev.sigma
    return np.linspace(lo, hi, 81)


def _auto_t_grid() -> np.ndarray:
    return np.round(np.arange(0.02, 0.981, 0.02), 10)


def joint_density_grid(
    model,
    n_paths: int,
    m_grid=None,
    t_grid=None,
    threads: int | None = None,
    tol: float = 1e-13,
) -> JointDensityGrid:
    """Tabulate the joint density on a grid and attach its mass defect.

    ``m_grid`` and ``t_grid`` default to a height window of twelve
    fluctuation scales around the typical maximum and a symmetric grid of
    times.  Columns are evaluated in parallel when ``threads`` exceeds 1;
    results are deterministic regardless of the thread count.
    """
    model = _coerce_model(model)
    _check_n(n_paths, 200)
    ev = _evaluator(model, n_paths, tol)
    m_arr = _auto_m_grid(ev) if m_grid is None else np.asarray(m_grid, dtype=float)
    t_arr = _auto_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if m_arr.ndim != 1 or m_arr.size == 0 or np.any(~np.isfinite(m_arr)) or np.any(m_arr <= 0.0):
        raise InvalidArgumentError("height grid must be a 1-d array of positive finite values")
    if t_arr.ndim != 1 or t_arr.size == 0 or np.any((t_arr <= 0.0) | (t_arr >= 1.0)):
        raise InvalidArgumentError("time grid must be a 1-d array strictly inside (0, 1)")

    # Factor the operators serially so the cache is never mutated from
    # worker threads, then fill columns (possibly) in parallel.
    for m in m_arr:
        if model is not ModelKind.BB and m <= ev.floor:
            # density() short-circuits these to zero; building their slow
            # near-zero-barrier operators would be pure waste.
            continue
        try:
            ev._op(float(m))
        except SeriesTooSlowError:
            pass

    def column(tv: float) -> np.ndarray:
        return np.array([ev.density(float(m), float(tv)) for m in m_arr])

    from ._parallel import ordered_map

    cols = ordered_map(column, [float(tv) for tv in t_arr], threads)
    values = np.column_stack(cols)
    defect = abs(1.0 - ev.total_mass())
    return JointDensityGrid(
        model=model,
        n_paths=n_paths,
        m_grid=m_arr,
        t_grid=t_arr,
        values=values,
        normalization_defect=defect,
    )
