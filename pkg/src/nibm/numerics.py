"""Shared numerical kernels: scaled floats, quadrature rules, dense linear algebra.

Positive quantities in this package routinely live at magnitudes like
e^{-600}, far outside double range, so values that may leave that range
travel as :class:`ScaledReal` (sign plus log-magnitude).  Gauss-Hermite
rules are built from the Jacobi matrix of the Hermite recurrence and store,
besides the usual weights for integrals against e^{-x^2}, the
Gaussian-free Christoffel weights 1 / sum_j phi_j(x_i)^2 that stay
representable at every order.  Determinants and solves use an in-house
partial-pivot elimination so that pivot failures surface with their index
and so the same code path can run on a double-double mirror of the matrix.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import dd
from ._errors import InvalidArgumentError, SingularMatrixError

_LOG_EPS = -745.0  # below exp() underflow; used as "zero" log magnitude
_PIVOT_FLOOR = 1e-300

__all__ = [
    "ScaledReal",
    "QuadratureRule",
    "SquareMatrix",
    "gauss_hermite",
    "gauss_legendre_mapped",
    "det_lu",
    "solve",
    "sym_eigen",
]


@dataclass(frozen=True)
class ScaledReal:
    """A real number stored as sign and natural log of magnitude.

    ``sign`` is -1, 0 or +1; for a zero value ``log_mag`` is -inf.  The
    representation survives magnitudes like e^{-50000} that would flush to
    zero as ordinary floats, at the price of supporting only multiplication
    and scaling directly.  Addition is done by the callers via signed
    log-sum-exp where they control the cancellation analysis.
    """

    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise InvalidArgumentError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 and math.isfinite(self.log_mag):
            object.__setattr__(self, "log_mag", -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "ScaledReal":
        x = float(x)
        if x == 0.0:
            return cls(0, -math.inf)
        if not math.isfinite(x):
            raise InvalidArgumentError(f"cannot represent non-finite value {x}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_mag > 709.0:
            return math.inf * self.sign
        return self.sign * math.exp(self.log_mag)

    def scaled(self, log_factor: float) -> "ScaledReal":
        """Multiply by e^{log_factor} without leaving log space."""
        if self.sign == 0:
            return self
        return ScaledReal(self.sign, self.log_mag + log_factor)

    def __mul__(self, other: "ScaledReal") -> "ScaledReal":
        if not isinstance(other, ScaledReal):
            return NotImplemented
        s = self.sign * other.sign
        if s == 0:
            return ScaledReal(0, -math.inf)
        return ScaledReal(s, self.log_mag + other.log_mag)

    def __neg__(self) -> "ScaledReal":
        return ScaledReal(-self.sign, self.log_mag)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a one-dimensional quadrature rule.

    ``kind`` is ``"hermite"`` (integrals of w(x) = e^{-x^2} times smooth
    functions over the line) or ``"legendre_mapped"`` (rational map of a
    Legendre rule onto the half line, ``map_scale`` sets the length scale).
    Hermite rules additionally carry ``gaussian_free_weights``, the
    Christoffel weights w_i e^{x_i^2}; those never underflow and are what
    the operator assembly consumes.
    """

    kind: str
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    map_scale: float | None = None
    gaussian_free_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise InvalidArgumentError("nodes and weights must be 1-d arrays of equal length")
        if len(nodes) != self.order:
            raise InvalidArgumentError("rule length must equal its order")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InvalidArgumentError("rule contains non-finite entries")
        if np.any(np.diff(nodes) <= 0.0):
            raise InvalidArgumentError("nodes must be strictly increasing")
        if np.any(weights < 0.0):
            raise InvalidArgumentError("weights must be non-negative")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class SquareMatrix:
    """Dense square matrix, optionally with a double-double mirror.

    ``entries`` holds the leading doubles.  When ``low`` is present the
    matrix value is understood as ``entries + low`` elementwise and the
    factorization routines run in double-double, rounding only the final
    result.
    """

    dim: int
    entries: np.ndarray
    low: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (self.dim, self.dim):
            raise InvalidArgumentError(f"entries must be {self.dim}x{self.dim}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("matrix entries must be finite")
        object.__setattr__(self, "entries", a)
        if self.low is not None:
            lo = np.asarray(self.low, dtype=float)
            if lo.shape != a.shape:
                raise InvalidArgumentError("low mirror must match entries shape")
            if not np.all(np.isfinite(lo)):
                raise InvalidArgumentError("low mirror must be finite")
            object.__setattr__(self, "low", lo)

    @classmethod
    def from_array(cls, a: np.ndarray, low: np.ndarray | None = None) -> "SquareMatrix":
        a = np.asarray(a, dtype=float)
        return cls(dim=a.shape[0], entries=a, low=low)


@functools.lru_cache(maxsize=64)
def _hermite_rule_arrays(order: int):
    # Jacobi matrix of the orthonormal Hermite recurrence: zero diagonal,
    # off-diagonal sqrt(j/2).  Its eigenvalues are the nodes.
    off = np.sqrt(np.arange(1, order) / 2.0)
    nodes = eigh_tridiagonal(np.zeros(order), off, eigvals_only=True)
    nodes = np.sort(nodes)
    # The spectrum is symmetric in exact arithmetic; pairing x with -x
    # removes the solver's rounding asymmetry.
    nodes = 0.5 * (nodes - nodes[::-1])
    # Christoffel weights via the orthonormal functions: 1 / sum phi_j^2.
    # This is stable at every order, unlike the e^{-x^2}-bearing weights.
    from .hermite import _phi_block_plain

    ph = _phi_block_plain(order - 1, nodes)
    wtil = 1.0 / np.sum(ph * ph, axis=0)
    w = wtil * np.exp(-nodes * nodes)
    nodes.setflags(write=False)
    w.setflags(write=False)
    wtil.setflags(write=False)
    return nodes, w, wtil


def _hermite_rule(order: int) -> QuadratureRule:
    nodes, w, wtil = _hermite_rule_arrays(order)
    return QuadratureRule(
        kind="hermite",
        order=order,
        nodes=nodes,
        weights=w,
        gaussian_free_weights=wtil,
    )


def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule: sum_i w_i f(x_i) ~ integral e^{-x^2} f(x) dx.

    ``order`` must lie in 1..500.  The rule integrates polynomials up to
    degree 2*order - 1 exactly.  Note that for orders beyond roughly 380
    the outermost true weights drop below the smallest positive double and
    are stored as zero; ``gaussian_free_weights`` remains accurate there.
    """
    if not isinstance(order, int) or isinstance(order, bool):
        raise InvalidArgumentError("order must be an integer")
    if not 1 <= order <= 500:
        raise InvalidArgumentError(f"order must be in 1..500, got {order}")
    return _hermite_rule(order)


@functools.lru_cache(maxsize=64)
def _legendre_unit(order: int):
    # Legendre rule moved from [-1, 1] to (0, 1).
    xs, ws = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (xs + 1.0)
    wu = 0.5 * ws
    u.setflags(write=False)
    wu.setflags(write=False)
    return u, wu


def _gl_mapped_arrays(order: int, map_scale: float):
    u, wu = _legendre_unit(order)
    nodes = map_scale * u / (1.0 - u)
    weights = wu * map_scale / (1.0 - u) ** 2
    return nodes, weights


def gauss_legendre_mapped(order: int, map_scale: float) -> QuadratureRule:
    """Legendre rule mapped to (0, inf) by x = map_scale * u / (1 - u).

    Approximates integral_0^inf f(x) dx for f decaying at least like a
    power beyond a few multiples of ``map_scale``.  ``order`` must lie in
    1..400 and ``map_scale`` must be positive.
    """
    if not isinstance(order, int) or isinstance(order, bool):
        raise InvalidArgumentError("order must be an integer")
    if not 1 <= order <= 400:
        raise InvalidArgumentError(f"order must be in 1..400, got {order}")
    if not (map_scale > 0.0 and math.isfinite(map_scale)):
        raise InvalidArgumentError(f"map_scale must be positive and finite, got {map_scale}")
    nodes, weights = _gl_mapped_arrays(order, float(map_scale))
    return QuadratureRule(
        kind="legendre_mapped", order=order, nodes=nodes, weights=weights, map_scale=float(map_scale)
    )


def _det_lu_plain(a: np.ndarray) -> float:
    a = a.copy()
    n = a.shape[0]
    sign = 1.0
    log_mag = 0.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if a[piv, k] == 0.0:
            return 0.0
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            sign = -sign
        pivot = a[k, k]
        if pivot < 0.0:
            sign = -sign
        log_mag += math.log(abs(pivot))
        if k + 1 < n:
            mult = a[k + 1 :, k] / pivot
            a[k + 1 :, k + 1 :] -= np.outer(mult, a[k, k + 1 :])
    if log_mag > 709.0:
        return sign * math.inf
    if log_mag < _LOG_EPS:
        return 0.0
    return sign * math.exp(log_mag)


def _det_lu_dd(hi: np.ndarray, lo: np.ndarray) -> float:
    a = (hi.copy(), lo.copy())
    n = hi.shape[0]
    sign = 1.0
    log_mag = 0.0
    for k in range(n):
        col = dd.to_float((a[0][k:, k], a[1][k:, k]))
        piv = k + int(np.argmax(np.abs(col)))
        if col[piv - k] == 0.0:
            return 0.0
        if piv != k:
            for part in a:
                part[[k, piv]] = part[[piv, k]]
            sign = -sign
        pivot = (a[0][k, k], a[1][k, k])
        pval = dd.to_float(pivot)
        if pval < 0.0:
            sign = -sign
        log_mag += math.log(abs(pval))
        if k + 1 < n:
            below = (a[0][k + 1 :, k], a[1][k + 1 :, k])
            mult = dd.div(below, pivot)
            row = (a[0][k, k + 1 :], a[1][k, k + 1 :])
            prod = dd.mul((mult[0][:, None], mult[1][:, None]), (row[0][None, :], row[1][None, :]))
            upd = dd.sub((a[0][k + 1 :, k + 1 :], a[1][k + 1 :, k + 1 :]), prod)
            a[0][k + 1 :, k + 1 :] = upd[0]
            a[1][k + 1 :, k + 1 :] = upd[1]
    if log_mag > 709.0:
        return sign * math.inf
    if log_mag < _LOG_EPS:
        return 0.0
    return sign * math.exp(log_mag)


def det_lu(matrix: SquareMatrix) -> float:
    """Determinant by in-house LU with partial pivoting.

    A zero pivot column simply yields 0.0.  When the matrix carries a
    double-double mirror the whole elimination runs in that precision and
    only the final determinant is rounded to a double.
    """
    if matrix.low is not None:
        return _det_lu_dd(matrix.entries, matrix.low)
    return _det_lu_plain(matrix.entries)


def solve(matrix: SquareMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve matrix @ x = rhs by partial-pivot elimination.

    Raises :class:`SingularMatrixError` carrying the elimination step at
    which every candidate pivot was below 1e-300 in magnitude.  ``rhs``
    may be a vector or a matrix of stacked right-hand sides.
    """
    a = matrix.entries.copy()
    b = np.asarray(rhs, dtype=float)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    if b.shape[0] != matrix.dim:
        raise InvalidArgumentError(f"rhs has {b.shape[0]} rows, expected {matrix.dim}")
    b = b.copy()
    n = matrix.dim
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < _PIVOT_FLOOR:
            raise SingularMatrixError(k)
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        if k + 1 < n:
            mult = a[k + 1 :, k] / a[k, k]
            a[k + 1 :, k + 1 :] -= np.outer(mult, a[k, k + 1 :])
            b[k + 1 :] -= mult[:, None] * b[k]
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x[:, 0] if vector_rhs else x


def sym_eigen(matrix: SquareMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns).  The input
    is checked for symmetry to a relative 1e-12 and rejected otherwise;
    the symmetric part is then handed to LAPACK.
    """
    a = matrix.entries
    scale = 1.0 + float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
        raise InvalidArgumentError("matrix is not symmetric to the required tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return vals, vecs


def _cholesky_plain(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Outer-product form; raises :class:`SingularMatrixError` with the
    failing column when a diagonal entry is not safely positive.
    """
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:
            raise SingularMatrixError(j, f"matrix not positive definite at column {j}")
        L[j, j] = math.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _cholesky_dd(hi: np.ndarray, lo: np.ndarray):
    """Double-double lower Cholesky factor, columnwise and vectorized."""
    n = hi.shape[0]
    Lh = np.zeros_like(hi)
    Ll = np.zeros_like(lo)
    for j in range(n):
        if j > 0:
            row = (Lh[j, :j], Ll[j, :j])
            s = dd.dot(row, row, axis=0)
            d = dd.sub((hi[j, j], lo[j, j]), s)
        else:
            d = (hi[j, j], lo[j, j])
        if not dd.to_float(d) > 0.0:
            raise SingularMatrixError(j, f"matrix not positive definite at column {j}")
        piv = dd.sqrt((np.asarray(d[0]), np.asarray(d[1])))
        Lh[j, j], Ll[j, j] = float(piv[0]), float(piv[1])
        if j + 1 < n:
            if j > 0:
                block = (Lh[j + 1 :, :j], Ll[j + 1 :, :j])
                rowb = (Lh[j, :j][None, :], Ll[j, :j][None, :])
                s = dd.total(dd.mul(block, rowb), axis=1)
                num = dd.sub((hi[j + 1 :, j], lo[j + 1 :, j]), s)
            else:
                num = (hi[j + 1 :, j], lo[j + 1 :, j])
            q = dd.div(num, (np.full(n - j - 1, piv[0]), np.full(n - j - 1, piv[1])))
            Lh[j + 1 :, j], Ll[j + 1 :, j] = q
    return Lh, Ll
