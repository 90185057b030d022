"""Finite-dimensional kernels for ensembles of non-intersecting paths.

Three path ensembles on the time interval [0, 1] share one computational
backbone: Brownian bridges (``bb``), Brownian excursions (``be``) and
reflected Brownian bridges (``rbb``), all conditioned never to intersect.
The probability that the top path stays below a barrier is a determinant
of the identity minus a small dense matrix whose entries are overlaps of
Hermite oscillator functions with their reflection about (multiples of)
the barrier.  Bridges need a single reflection; the half-line models need
the full image series over every multiple, with coefficients 2 for
excursions and alternating +-2 for reflected bridges, truncated by a
rigorous Gaussian bound.

The joint law of the maximum and its location enters through a rank-one
update of the same matrix; the two vectors of that update are evaluated
here in log space so the common e^{-n tau} growth of their components
never over- or underflows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidArgumentError, SeriesTooSlowError
from .hermite import _phi_block_scaled
from .numerics import ScaledReal, SquareMatrix

_MAX_PATHS = 500
_MIN_HALFLINE_BARRIER = 1e-3
_MAX_SERIES_TERMS = 10_000

__all__ = [
    "ModelKind",
    "OperatorMatrix",
    "PsiPair",
    "build_operator",
    "build_gue_projection",
    "build_psi_pair",
]


class ModelKind(str, enum.Enum):
    """Which non-intersecting ensemble a computation refers to."""

    BB = "bb"
    BE = "be"
    RBB = "rbb"

    def hermite_indices(self, n_paths: int) -> np.ndarray:
        """Hermite indices spanning the reduced N-dimensional subspace.

        Bridges use 0..N-1; the half-line models keep a single parity,
        odd indices for excursions and even ones for reflected bridges.
        """
        base = np.arange(n_paths)
        if self is ModelKind.BB:
            return base
        if self is ModelKind.BE:
            return 2 * base + 1
        return 2 * base


def _coerce_model(model) -> ModelKind:
    if isinstance(model, ModelKind):
        return model
    try:
        return ModelKind(str(model).lower())
    except ValueError:
        raise InvalidArgumentError(f"unknown model {model!r}; expected one of bb, be, rbb") from None


def _check_paths(n_paths: int):
    if not isinstance(n_paths, (int, np.integer)) or isinstance(n_paths, bool):
        raise InvalidArgumentError("n_paths must be an integer")
    if not 1 <= n_paths <= _MAX_PATHS:
        raise InvalidArgumentError(f"n_paths must be in 1..{_MAX_PATHS}, got {n_paths}")


@dataclass(frozen=True)
class OperatorMatrix:
    """Discretized trace-class operator for one model at one barrier.

    ``entries`` is the N x N matrix acting on the reduced Hermite basis;
    the CDF of the top-path maximum is det(I - entries).
    ``truncation_terms`` records how many reflection images were summed.
    """

    model: ModelKind
    n_paths: int
    barrier: float
    entries: SquareMatrix
    truncation_terms: int


@dataclass(frozen=True)
class PsiPair:
    """Rank-one update vectors for the joint maximum/location density.

    ``u`` evaluates the location-dependent family at time ``t`` and ``v``
    at the reflected time 1 - t; components are scaled reals because the
    shared factor e^{-n tau}, tau = log(t/(1-t))/2, spans hundreds of
    orders of magnitude near the ends of the time interval.
    """

    model: ModelKind
    n_paths: int
    m: float
    t: float
    tau: float
    u: tuple[ScaledReal, ...]
    v: tuple[ScaledReal, ...]


def _overlap_matrix(indices: np.ndarray, centre: float) -> np.ndarray:
    """Matrix of reflected overlaps for all index pairs at one centre.

    One Gauss-Hermite rule of order max_index + 1 integrates every pair
    (degree at most 2 * max_index) exactly; the Gaussian-free Christoffel
    weights keep the assembly stable at high order.
    """
    from .numerics import _hermite_rule_arrays

    nmax = int(indices.max())
    order = nmax + 1
    u, _, wtil = _hermite_rule_arrays(order)
    a_vals, a_offs = _phi_block_scaled(nmax, centre + u)
    b_vals, b_offs = _phi_block_scaled(nmax, centre - u)
    with np.errstate(under="ignore"):
        a = a_vals[indices] * np.exp(a_offs[indices])
        b = b_vals[indices] * np.exp(b_offs[indices])
    return (a * wtil) @ b.T


def build_operator(model, n_paths: int, barrier: float, tol: float = 1e-14) -> OperatorMatrix:
    """Assemble the barrier operator for a model in the reduced Hermite basis.

    ``barrier`` is the barrier in the sqrt(2)-scaled coordinates the
    Hermite basis lives in.  For the half-line models the image series
    over reflections about k * barrier is truncated once the rigorous
    bound 2 e^{-(k b)^2} (k b + 1)^{max_index + 1} drops below ``tol``;
    barriers at or below 1e-3 are rejected because that bound would need
    more than the supported number of terms.
    """
    model = _coerce_model(model)
    _check_paths(n_paths)
    if not (math.isfinite(barrier) and barrier > 0.0):
        raise InvalidArgumentError(f"barrier must be positive and finite, got {barrier}")
    if not (math.isfinite(tol) and 1e-16 <= tol <= 1e-2):
        raise InvalidArgumentError(f"tol must be in [1e-16, 1e-2], got {tol}")
    indices = model.hermite_indices(n_paths)
    nmax = int(indices.max())

    if model is ModelKind.BB:
        entries = _overlap_matrix(indices, barrier)
        terms = 1
    else:
        if barrier <= _MIN_HALFLINE_BARRIER:
            raise SeriesTooSlowError(
                f"barrier {barrier:g} needs too many reflection images at tol {tol:g}"
            )
        log_tol = math.log(tol)
        entries = np.zeros((n_paths, n_paths))
        terms = 0
        k = 1
        while True:
            kb = k * barrier
            log_bound = math.log(2.0) - kb * kb + (nmax + 1) * math.log1p(kb)
            if log_bound < log_tol and k > 1:
                break
            coeff = 2.0 if model is ModelKind.BE else 2.0 * (-1.0) ** (k + 1)
            entries += coeff * _overlap_matrix(indices, kb)
            terms += 1
            k += 1
            if k > _MAX_SERIES_TERMS:
                raise SeriesTooSlowError(
                    f"reflection series for barrier {barrier:g} exceeded "
                    f"{_MAX_SERIES_TERMS} terms at tol {tol:g}"
                )
    entries = 0.5 * (entries + entries.T)
    return OperatorMatrix(
        model=model,
        n_paths=n_paths,
        barrier=float(barrier),
        entries=SquareMatrix.from_array(entries),
        truncation_terms=terms,
    )


def build_gue_projection(n_paths: int, s: float) -> OperatorMatrix:
    """Projection-kernel matrix whose determinant gives the GUE top-eigenvalue law.

    Entry (j, l) is the integral of phi_j phi_l over (s, inf) for
    j, l < n_paths; off-diagonal entries collapse to boundary Wronskians,
    the diagonal is integrated by panels.  Stored as an
    :class:`OperatorMatrix` with the threshold in the ``barrier`` slot.
    """
    _check_paths(n_paths)
    if n_paths > 300:
        raise InvalidArgumentError(f"n_paths must be at most 300 here, got {n_paths}")
    if not (math.isfinite(s) and abs(s) <= 100.0):
        raise InvalidArgumentError(f"threshold must satisfy |s| <= 100, got {s}")
    n = n_paths
    vals, offs = _phi_block_scaled(n, np.array([s]))
    with np.errstate(divide="ignore"):
        logphi = np.log(np.abs(vals[:, 0])) + offs[:, 0]
    sgphi = np.sign(vals[:, 0])
    # Ladder derivative on the shared offsets, kept as (sign, log) pairs,
    # computed row by row to honour the per-row offsets.
    idx = np.arange(n)
    dlog = np.full(n, -np.inf)
    dsg = np.zeros(n)
    for j in range(n):
        lo_term = (
            math.sqrt(j / 2.0) * float(vals[j - 1, 0]) * math.exp(offs[j - 1, 0] - offs[j + 1, 0])
            if j >= 1
            else 0.0
        )
        hi_term = math.sqrt((j + 1) / 2.0) * float(vals[j + 1, 0])
        comb = lo_term - hi_term
        if comb != 0.0:
            dlog[j] = math.log(abs(comb)) + offs[j + 1, 0]
            dsg[j] = math.copysign(1.0, comb)
    # The scaled block carries one extra row (index n) for the ladder;
    # the kernel itself only involves indices below n.
    logphi = logphi[:n]
    sgphi = sgphi[:n]

    entries = np.zeros((n, n))
    l1 = dlog[:, None] + logphi[None, :]
    l2 = logphi[:, None] + dlog[None, :]
    shift = np.maximum(l1, l2)
    ok = np.isfinite(shift)
    with np.errstate(under="ignore", invalid="ignore"):
        num = np.where(
            ok,
            dsg[:, None] * sgphi[None, :] * np.exp(np.where(ok, l1 - shift, -np.inf))
            - sgphi[:, None] * dsg[None, :] * np.exp(np.where(ok, l2 - shift, -np.inf)),
            0.0,
        )
        scale = np.where(ok & (shift > -700.0), np.exp(np.where(ok, shift, 0.0)), 0.0)
    denom = 2.0 * (idx[:, None] - idx[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        wron = num * scale / denom
    entries[~np.eye(n, dtype=bool)] = wron[~np.eye(n, dtype=bool)]

    from .hermite import _gue_diagonal

    entries[np.diag_indices(n)] = _gue_diagonal(idx, s)
    entries = 0.5 * (entries + entries.T)
    return OperatorMatrix(
        model=ModelKind.BB,
        n_paths=n,
        barrier=float(s),
        entries=SquareMatrix.from_array(entries),
        truncation_terms=1,
    )


def _stream_logsum(acc_sign, acc_log, term_sign, term_log):
    """Fold one signed log-magnitude term into a running signed log sum."""
    peak = np.maximum(acc_log, term_log)
    safe = np.isfinite(peak)
    combined = np.where(
        safe,
        acc_sign * np.exp(np.where(safe, acc_log - peak, 0.0))
        + term_sign * np.exp(np.where(safe, term_log - peak, 0.0)),
        0.0,
    )
    with np.errstate(divide="ignore"):
        new_log = np.where(combined != 0.0, np.log(np.abs(combined)) + peak, -np.inf)
    new_sign = np.sign(combined)
    return new_sign, new_log


def _psi_side(model: ModelKind, indices: np.ndarray, r: float, tau_s: float, tol: float):
    """Signed log values of the rank-one family for one time orientation.

    Evaluates, for each basis index n, the series over reflection images
    of sqrt(2) g^{3/2} e^{-n tau_s} [phi_n'(xi_k) + r sinh(tau_s) phi_n(xi_k)]
    at xi_k = (2k+1) r cosh(tau_s), written in the cancellation-free form
    sqrt(2n) phi_{n-1}(xi_k) - (2k+1) r e^{-tau_s} phi_n(xi_k) so the
    bracket stays accurate for large tau_s.  Returns (signs, logs).
    """
    cosh_t = math.cosh(tau_s)
    sinh2 = math.sinh(2.0 * tau_s)
    xi = r * cosh_t
    nmax = int(indices.max())
    root2n = np.sqrt(2.0 * indices.astype(float))
    acc_sign = np.zeros(indices.size)
    acc_log = np.full(indices.size, -np.inf)
    log_tol = math.log(tol)
    quiet = 0
    k = 0
    while True:
        if model is ModelKind.BB:
            if k > 0:
                break
            coeff = 1.0
        elif model is ModelKind.BE:
            coeff = 2.0
        else:
            coeff = 2.0 if k == 0 else 2.0 * (-1.0) ** k
        y = (2 * k + 1) * xi
        vals, offs = _phi_block_scaled(nmax, np.array([y]))
        with np.errstate(divide="ignore"):
            logphi = np.log(np.abs(vals[:, 0])) + offs[:, 0]
        sgphi = np.sign(vals[:, 0])
        la = np.where(indices >= 1, np.log(np.where(root2n > 0, root2n, 1.0)) + logphi[np.maximum(indices - 1, 0)], -np.inf)
        sa = np.where(indices >= 1, sgphi[np.maximum(indices - 1, 0)], 0.0)
        # (2k+1) r e^{-tau_s} can overflow for very negative tau_s, so it is
        # folded through logs instead of being evaluated directly.
        lb = math.log((2 * k + 1) * r) - tau_s + logphi[indices]
        sb = -sgphi[indices]
        shift = np.maximum(la, lb)
        okb = np.isfinite(shift)
        with np.errstate(under="ignore"):
            bracket = np.where(
                okb,
                sa * np.exp(np.where(okb, la - shift, 0.0)) + sb * np.exp(np.where(okb, lb - shift, 0.0)),
                0.0,
            )
        with np.errstate(divide="ignore"):
            term_log = np.where(
                bracket != 0.0,
                np.log(np.abs(bracket)) + shift + math.log(abs(coeff)) + k * (k + 1) * r * r * sinh2,
                -np.inf,
            )
        term_sign = np.sign(bracket) * math.copysign(1.0, coeff)
        acc_sign, acc_log = _stream_logsum(acc_sign, acc_log, term_sign, term_log)
        if model is ModelKind.BB:
            break
        rel = np.max(term_log - np.where(np.isfinite(acc_log), acc_log, 0.0))
        if k >= 1 and rel < log_tol:
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
        k += 1
        if k > _MAX_SERIES_TERMS:
            raise SeriesTooSlowError(
                f"image series for the density vectors stalled at m g = {xi:g}"
            )
    g = math.sqrt(2.0) * cosh_t
    log_pref = 0.5 * math.log(2.0) + 1.5 * math.log(g)
    logs = acc_log + log_pref - indices * tau_s
    return acc_sign, logs


def build_psi_pair(model, n_paths: int, m: float, t: float, tol: float = 1e-13) -> PsiPair:
    """Rank-one update vectors at maximum height m and location t.

    ``u`` collects the family evaluated at time t and ``v`` the same
    family at 1 - t, both on the model's reduced basis, with components
    returned as scaled reals.  Times must lie strictly inside (0, 1);
    for the half-line models small m is rejected exactly as in
    :func:`build_operator` because the same image series appears here.
    """
    model = _coerce_model(model)
    _check_paths(n_paths)
    if not (math.isfinite(m) and 0.0 < m <= 100.0):
        raise InvalidArgumentError(f"maximum height must lie in (0, 100], got {m}")
    if not (isinstance(t, (float, int, np.floating)) and 0.0 < float(t) < 1.0):
        raise InvalidArgumentError(f"location must lie strictly inside (0, 1), got {t}")
    if not (math.isfinite(tol) and 1e-16 <= tol <= 1e-2):
        raise InvalidArgumentError(f"tol must be in [1e-16, 1e-2], got {tol}")
    t = float(t)
    r = math.sqrt(2.0) * m
    if model is not ModelKind.BB and r <= _MIN_HALFLINE_BARRIER:
        raise SeriesTooSlowError(
            f"height {m:g} needs too many reflection images for model {model.value}"
        )
    tau = 0.5 * math.log(t / (1.0 - t))
    indices = model.hermite_indices(n_paths)
    su, lu = _psi_side(model, indices, r, tau, tol)
    sv, lv = _psi_side(model, indices, r, -tau, tol)
    u = tuple(
        ScaledReal(int(s), float(l)) if s != 0 else ScaledReal(0, -math.inf)
        for s, l in zip(su, lu)
    )
    v = tuple(
        ScaledReal(int(s), float(l)) if s != 0 else ScaledReal(0, -math.inf)
        for s, l in zip(sv, lv)
    )
    return PsiPair(model=model, n_paths=n_paths, m=float(m), t=t, tau=tau, u=u, v=v)
