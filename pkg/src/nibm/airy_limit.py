"""Edge scaling limit: Airy functions, the GOE Tracy-Widom law, and the
limiting joint density of the rescaled maximum and its location.

The Airy function is evaluated in house: a Maclaurin series carried in
double-double arithmetic up to |x| = 9.5 (the two series halves cancel to
e^{-2 zeta} there, which plain doubles cannot survive), and the standard
large-argument expansions beyond, where optimal truncation already beats
1e-14.  Determinants of Airy-kernel operators are discretized by a
rational map of a Legendre rule onto the half line and evaluated with the
in-house LU.

The limiting objects mirror the finite-N API: ``f_goe`` is the CDF of the
GOE Tracy-Widom law (convention: off-diagonal variance 1), and
``limit_joint_density`` the joint law of the centred, rescaled maximum
height and location, a determinant difference of a reduced kernel and a
rank-one update built from shifted Airy functions.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from . import dd
from ._errors import InvalidArgumentError, QuadratureError
from .numerics import QuadratureRule, SquareMatrix, det_lu, gauss_legendre_mapped, solve

_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
# The same constants as double-double pairs: near the series edge they
# multiply sums of size e^{2 zeta} ~ 1e17, so their half-ulp rounding as
# plain doubles would already cost ~1e-11 of the final value.
_AI0_DD = (0.3550280538878172, 2.05233632436212e-17)
_AIP0_DD = (-0.2588194037928068, 2.522243111610832e-17)
_SERIES_EDGE = 9.5
_UNDERFLOW_ZETA = 460.0

_CBRT2 = 2.0 ** (1.0 / 3.0)
_SHIFT_SCALE = 4.0 ** (1.0 / 3.0)

__all__ = [
    "AiryValue",
    "KernelId",
    "FredholmGrid",
    "ConvergenceRow",
    "ConvergenceReport",
    "airy",
    "nystrom_matrix",
    "f_goe",
    "limit_joint_density",
    "convergence_report",
]


@dataclass(frozen=True)
class AiryValue:
    """Ai and Ai' at one point; ``underflow`` warns that the true value
    sits at or below the 1e-200 scale where relative accuracy fades."""

    x: float
    ai: float
    ai_prime: float
    underflow: bool = False


class KernelId(str, enum.Enum):
    """Which Airy-type kernel a discretization refers to."""

    GOE_SOURCE = "goe_source"  # B_m(x, y) = Ai(x + y + m)
    LIMIT_REDUCED = "limit_reduced"  # 2^{-1/3} Ai(2^{-1/3}(x + y) + 4^{1/3} r)


@dataclass(frozen=True)
class FredholmGrid:
    """A Nystrom discretization of one shifted kernel on (0, inf).

    ``shift`` is the kernel's shift parameter (the threshold m for the
    GOE source kernel, the rescaled height r for the reduced one).  The
    symmetrized matrix uses sqrt(w_i w_j) K(x_i, x_j), which keeps the
    discretized operator symmetric.
    """

    kernel: KernelId
    shift: float
    rule: QuadratureRule
    symmetrized: bool = True


def _u_v_coefficients(count: int):
    u = [1.0]
    for k in range(count - 1):
        u.append(u[-1] * (6 * k + 1) * (6 * k + 5) / (72.0 * (k + 1)))
    v = [-(6 * k + 1) / (6 * k - 1) * u[k] if k else 1.0 for k in range(count)]
    return np.array(u), np.array(v)


_ASY_U, _ASY_V = _u_v_coefficients(60)


def _airy_series_dd(x: np.ndarray):
    """Maclaurin evaluation of (Ai, Ai') in double-double, any |x| <= 9.5."""
    xdd = dd.from_float(x)
    x3 = dd.mul(dd.mul(xdd, xdd), xdd)
    # Term recurrences for f, g and their derivatives; all ratios are
    # x^3 over a product of two small integers, divided exactly in dd.
    def _shrink(term, d1, d2):
        return dd.div(dd.mul(term, x3), dd.from_float(np.full_like(x, float(d1 * d2))))

    tf = dd.from_float(np.ones_like(x))
    tg = (x.copy(), np.zeros_like(x))
    tfp = dd.mul(xdd, dd.mul_f(xdd, 0.5))
    tgp = dd.from_float(np.ones_like(x))
    sf, sg, sfp, sgp = tf, tg, tfp, tgp
    for k in range(160):
        tf = _shrink(tf, 3 * k + 2, 3 * k + 3)
        tg = _shrink(tg, 3 * k + 3, 3 * k + 4)
        tgp = _shrink(tgp, 3 * k + 1, 3 * k + 3)
        sf = dd.add(sf, tf)
        sg = dd.add(sg, tg)
        sgp = dd.add(sgp, tgp)
        if k >= 1:
            # The derivative of the even series starts one power later,
            # so its k-th step lags the others by one.
            tfp = _shrink(tfp, 3 * k, 3 * k + 2)
            sfp = dd.add(sfp, tfp)
        biggest = max(
            float(np.max(np.abs(tf[0]))),
            float(np.max(np.abs(tg[0]))),
            float(np.max(np.abs(tfp[0]))),
            float(np.max(np.abs(tgp[0]))),
        )
        scale = max(float(np.max(np.abs(sf[0]))), 1.0)
        if biggest < 1e-36 * scale:
            break
    c1 = (np.full_like(x, _AI0_DD[0]), np.full_like(x, _AI0_DD[1]))
    c2 = (np.full_like(x, _AIP0_DD[0]), np.full_like(x, _AIP0_DD[1]))
    ai = dd.to_float(dd.add(dd.mul(sf, c1), dd.mul(sg, c2)))
    aip = dd.to_float(dd.add(dd.mul(sfp, c1), dd.mul(sgp, c2)))
    return ai, aip


def _asym_sums(zeta: np.ndarray, coeffs: np.ndarray):
    """Optimally truncated sum of coeffs[k] (-1)^k zeta^{-k}, elementwise."""
    acc = np.zeros_like(zeta)
    prev = np.full_like(zeta, math.inf)
    active = np.ones(zeta.shape, dtype=bool)
    for k in range(coeffs.size):
        tk = coeffs[k] * (-1.0) ** k * zeta ** (-float(k))
        # Freeze each point once its terms start growing again: the
        # expansion is divergent and best truncated at the smallest term.
        active &= np.abs(tk) <= prev
        acc = np.where(active, acc + tk, acc)
        prev = np.where(active, np.abs(tk), prev)
        if not np.any(active):
            break
        if float(np.max(np.abs(tk), initial=0.0, where=active)) < 1e-20:
            break
    return acc


def _airy_asym_pos(x: np.ndarray):
    """(scaled Ai, scaled Ai', zeta) for x > series edge; Ai = scaled * e^{-zeta}."""
    zeta = (2.0 / 3.0) * x ** 1.5
    sa = _asym_sums(zeta, _ASY_U)
    sv = _asym_sums(zeta, _ASY_V)
    pref = 1.0 / (2.0 * math.sqrt(math.pi) * x**0.25)
    ai_s = pref * sa
    aip_s = -(x**0.25) / (2.0 * math.sqrt(math.pi)) * sv
    return ai_s, aip_s, zeta


def _airy_asym_neg(x: np.ndarray):
    """(Ai, Ai') for x < -series edge via the oscillatory expansion."""
    y = -x
    zeta = (2.0 / 3.0) * y ** 1.5
    phase = zeta - 0.25 * math.pi
    even_u = _asym_sums(zeta**2, _ASY_U[0::2])
    odd_u = _asym_sums(zeta**2, _ASY_U[1::2]) / zeta
    even_v = _asym_sums(zeta**2, _ASY_V[0::2])
    odd_v = _asym_sums(zeta**2, _ASY_V[1::2]) / zeta
    ai = (np.cos(phase) * even_u + np.sin(phase) * odd_u) / (math.sqrt(math.pi) * y**0.25)
    aip = (np.sin(phase) * even_v - np.cos(phase) * odd_v) * (y**0.25) / math.sqrt(math.pi)
    return ai, aip


def _airy_many(x: np.ndarray):
    """Vectorized (ai, ai_prime, underflow) without domain restrictions."""
    x = np.asarray(x, dtype=float)
    ai = np.empty_like(x)
    aip = np.empty_like(x)
    under = np.zeros(x.shape, dtype=bool)
    mid = np.abs(x) <= _SERIES_EDGE
    if np.any(mid):
        a, ap = _airy_series_dd(x[mid])
        ai[mid] = a
        aip[mid] = ap
    pos = x > _SERIES_EDGE
    if np.any(pos):
        ai_s, aip_s, zeta = _airy_asym_pos(x[pos])
        with np.errstate(under="ignore"):
            damp = np.exp(-np.minimum(zeta, 746.0))
        ai[pos] = ai_s * damp
        aip[pos] = aip_s * damp
        under[pos] = zeta > _UNDERFLOW_ZETA
    neg = x < -_SERIES_EDGE
    if np.any(neg):
        a, ap = _airy_asym_neg(x[neg])
        ai[neg] = a
        aip[neg] = ap
    return ai, aip, under


def airy(x: float) -> AiryValue:
    """Ai(x) and Ai'(x), accurate to about 1e-12 relative on [-60, 200].

    For large positive x the value decays like e^{-(2/3) x^{3/2}}; once
    that scale passes 1e-200 the ``underflow`` flag is set and, beyond
    double range, zeros are returned with the flag still raised.
    """
    xf = float(x)
    if not (math.isfinite(xf) and -60.0 <= xf <= 200.0):
        raise InvalidArgumentError(f"argument must lie in [-60, 200], got {x}")
    a, ap, under = _airy_many(np.array([xf]))
    return AiryValue(x=xf, ai=float(a[0]), ai_prime=float(ap[0]), underflow=bool(under[0]))


def _airy_log_pos(x: np.ndarray):
    """(log|Ai|, sign Ai, log|Ai'|, sign Ai') for arbitrary real x arrays.

    Positive arguments factor the e^{-zeta} decay into the log; this is
    what keeps products like e^{x t} Ai(x + c) finite in the rank-one
    vectors of the limit density.
    """
    x = np.asarray(x, dtype=float)
    la = np.empty_like(x)
    sa = np.empty_like(x)
    lap = np.empty_like(x)
    sap = np.empty_like(x)
    small = x <= _SERIES_EDGE
    if np.any(small):
        a, ap, _ = _airy_many(x[small])
        with np.errstate(divide="ignore"):
            la[small] = np.log(np.abs(a))
            lap[small] = np.log(np.abs(ap))
        sa[small] = np.sign(a)
        sap[small] = np.sign(ap)
    big = ~small
    if np.any(big):
        ai_s, aip_s, zeta = _airy_asym_pos(x[big])
        with np.errstate(divide="ignore"):
            la[big] = np.log(np.abs(ai_s)) - zeta
            lap[big] = np.log(np.abs(aip_s)) - zeta
        sa[big] = np.sign(ai_s)
        sap[big] = np.sign(aip_s)
    return la, sa, lap, sap


def nystrom_matrix(grid: FredholmGrid) -> np.ndarray:
    """Dense symmetrized Nystrom matrix of the grid's kernel."""
    x = grid.rule.nodes
    w = grid.rule.weights
    if grid.kernel is KernelId.GOE_SOURCE:
        kernel = _airy_many(np.add.outer(x, x) + grid.shift)[0]
    else:
        kernel = _CBRT2 ** -1 * _airy_many(_CBRT2 ** -1 * np.add.outer(x, x) + _SHIFT_SCALE * grid.shift)[0]
    if grid.symmetrized:
        sw = np.sqrt(w)
        return kernel * np.outer(sw, sw)
    return kernel * w[None, :]


def _goe_grid(m: float, order: int) -> FredholmGrid:
    rule_nodes, rule_weights = _mapped_rule(order)
    rule = QuadratureRule(
        kind="legendre_mapped", order=order, nodes=rule_nodes, weights=rule_weights, map_scale=8.0
    )
    return FredholmGrid(kernel=KernelId.GOE_SOURCE, shift=m, rule=rule)


@functools.lru_cache(maxsize=16)
def _mapped_rule(order: int):
    from .numerics import _gl_mapped_arrays

    nodes, weights = _gl_mapped_arrays(order, 8.0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@functools.lru_cache(maxsize=256)
def _goe_det(m: float, order: int) -> float:
    grid = _goe_grid(m, order)
    k = nystrom_matrix(grid)
    return det_lu(SquareMatrix.from_array(np.eye(order) - k))


def f_goe(m: float, order: int = 240) -> float:
    """CDF of the GOE Tracy-Widom law at m.

    Scaling convention: for an N x N symmetric Gaussian matrix with
    off-diagonal variance 1 the top eigenvalue fluctuates like
    2 sqrt(N) + N^{-1/6} times this law.  Internally the Fredholm
    determinant of Ai(x + y + m) on (0, inf) is evaluated at ``order``
    and at twice that; the finer value is returned and the difference
    must stay below 1e-6 or a :class:`QuadratureError` is raised.
    """
    if not (math.isfinite(m) and -12.0 <= m <= 100.0):
        raise InvalidArgumentError(f"threshold must lie in [-12, 100], got {m}")
    if not isinstance(order, int) or isinstance(order, bool) or not 40 <= order <= 500:
        raise InvalidArgumentError(f"order must be an integer in 40..500, got {order}")
    coarse = _goe_det(float(m), order)
    fine = _goe_det(float(m), 2 * order)
    defect = abs(fine - coarse)
    if defect > 1e-6:
        raise QuadratureError(
            f"GOE determinant doubling defect {defect:.3e} at m={m:g} exceeds 1e-6"
        )
    return min(max(fine, 0.0), 1.0)


@functools.lru_cache(maxsize=64)
def _limit_base(r: float, order: int):
    """Shared per-r data for the limit density: matrix and base determinant."""
    nodes, weights = _mapped_rule(order)
    rule = QuadratureRule(
        kind="legendre_mapped", order=order, nodes=nodes, weights=weights, map_scale=8.0
    )
    grid = FredholmGrid(kernel=KernelId.LIMIT_REDUCED, shift=r, rule=rule)
    k = nystrom_matrix(grid)
    a = np.eye(order) - k
    det0 = det_lu(SquareMatrix.from_array(a))
    return a, det0


def _limit_vectors(r: float, t: float, order: int):
    """sqrt(w)-weighted rank-one vectors of the limit density at (r, t)."""
    nodes, weights = _mapped_rule(order)
    out = []
    for tv in (t, -t):
        arg = nodes + r + tv * tv
        la, sa, lap, sap = _airy_log_pos(arg)
        # 2 e^{x t} [t Ai(arg) + Ai'(arg)], assembled in logs because for
        # positive t the factor e^{x t} overflows long before the Airy
        # decay e^{-(2/3) arg^{3/2}} wins; their sum in logs never does.
        shift = np.maximum(la, lap)
        ok = np.isfinite(shift)
        safe_shift = np.where(ok, shift, 0.0)
        with np.errstate(under="ignore"):
            bracket = tv * sa * np.exp(np.where(ok, la, -np.inf) - safe_shift)
            bracket += sap * np.exp(np.where(ok, lap, -np.inf) - safe_shift)
            logmag = np.where(ok, nodes * tv + shift, -np.inf)
            vec = np.where(
                logmag > -700.0, 2.0 * bracket * np.exp(np.minimum(logmag, 700.0)), 0.0
            )
        out.append(vec * np.sqrt(weights))
    return out


def limit_joint_density(r: float, t: float, order: int = 240, method: str = "difference") -> float:
    """Joint density of the rescaled maximum height r and location t, at the edge limit.

    Normalized so that its double integral over the plane is 1; symmetric
    in t.  ``method`` is the determinant difference by default, with the
    resolvent trace form available as a cross-check.
    """
    if not (math.isfinite(r) and -12.0 <= r <= 30.0):
        raise InvalidArgumentError(f"height must lie in [-12, 30], got {r}")
    if not (math.isfinite(t) and abs(t) <= 10.0):
        raise InvalidArgumentError(f"location must satisfy |t| <= 10, got {t}")
    if method not in ("difference", "trace"):
        raise InvalidArgumentError(f"method must be 'difference' or 'trace', got {method!r}")
    if not isinstance(order, int) or isinstance(order, bool) or not 40 <= order <= 500:
        raise InvalidArgumentError(f"order must be an integer in 40..500, got {order}")
    a, det0 = _limit_base(float(r), order)
    p, q = _limit_vectors(float(r), float(t), order)
    if method == "difference":
        det1 = det_lu(SquareMatrix.from_array(a + np.outer(p, q)))
        value = det1 - det0
    else:
        core = float(q @ solve(SquareMatrix.from_array(a), p))
        value = core * det0
    if -1e-12 < value < 0.0:
        value = 0.0
    return value


@dataclass(frozen=True)
class ConvergenceRow:
    """Sup-norm distances between one finite ensemble and the limit."""

    n_paths: int
    sup_cdf_error: float
    sup_density_error: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    """Finite-size convergence of the rescaled laws to the edge limit."""

    model: "ModelKind"
    rows: tuple[ConvergenceRow, ...]
    m_grid: np.ndarray
    t_grid: np.ndarray


def _scaling(model, n_paths: int):
    """(height map, time map, jacobian) from rescaled to raw coordinates."""
    from .finite_kernels import ModelKind

    if model is ModelKind.BB:
        centre = math.sqrt(n_paths)
        h_scale = 0.5 * n_paths ** (-1.0 / 6.0)
        t_scale = 0.5 * n_paths ** (-1.0 / 3.0)
    else:
        centre = math.sqrt(2.0 * n_paths)
        h_scale = 2.0 ** (-7.0 / 6.0) * n_paths ** (-1.0 / 6.0)
        t_scale = 2.0 ** (-4.0 / 3.0) * n_paths ** (-1.0 / 3.0)
    return centre, h_scale, t_scale


def convergence_report(
    model,
    n_list,
    m_grid=None,
    t_grid=None,
    include_density: bool = True,
    order: int = 240,
) -> ConvergenceReport:
    """Measure sup-norm convergence of rescaled laws to the Tracy-Widom limit.

    For each N the maximum CDF is evaluated on the rescaled height grid
    and compared with the limit CDF; optionally the rescaled joint
    density is compared with the limit density on the product grid,
    restricted to cells whose rescaled coordinates exist at that N.
    Errors should decrease as N grows, at the known N^{-1/3} pace.
    """
    from .distributions import joint_density, max_cdf
    from .finite_kernels import ModelKind, _coerce_model

    model = _coerce_model(model)
    ns = [int(n) for n in n_list]
    if not ns or any(n < 1 or n > 200 for n in ns):
        raise InvalidArgumentError("n_list must contain sizes in 1..200")
    m_arr = np.linspace(-4.0, 3.0, 29) if m_grid is None else np.asarray(m_grid, dtype=float)
    t_arr = np.linspace(-2.0, 2.0, 9) if t_grid is None else np.asarray(t_grid, dtype=float)
    limit_cdf = np.array([f_goe(_SHIFT_SCALE * mv, order=order) for mv in m_arr])
    if include_density:
        limit_density = np.array(
            [[limit_joint_density(mv, tv, order=order) for tv in t_arr] for mv in m_arr]
        )
    rows = []
    for n in ns:
        centre, h_scale, t_scale = _scaling(model, n)
        cdf_err = 0.0
        for mv, ref in zip(m_arr, limit_cdf):
            raw = max_cdf(model, n, centre + h_scale * mv)
            cdf_err = max(cdf_err, abs(raw - ref))
        dens_err = None
        if include_density:
            jac = h_scale * t_scale
            dens_err = 0.0
            for i, mv in enumerate(m_arr):
                for j, tv in enumerate(t_arr):
                    mm = centre + h_scale * mv
                    tt = 0.5 + t_scale * tv
                    if mm <= 0.0 or not 0.0 < tt < 1.0:
                        # at small N the rescaled cell falls outside the
                        # physical window; the comparison is over the
                        # cells that exist
                        continue
                    raw = joint_density(model, n, mm, tt)
                    dens_err = max(dens_err, abs(jac * raw - limit_density[i, j]))
        rows.append(ConvergenceRow(n_paths=n, sup_cdf_error=cdf_err, sup_density_error=dens_err))
    return ConvergenceReport(model=model, rows=tuple(rows), m_grid=m_arr, t_grid=t_arr)
