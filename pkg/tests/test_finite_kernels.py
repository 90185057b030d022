"""Barrier operators, the GUE projection matrix and the rank-one vectors."""

from __future__ import annotations

import math

import numpy as np
import pytest

from nibm._errors import InvalidArgumentError, SeriesTooSlowError
from nibm.finite_kernels import (
    ModelKind,
    _coerce_model,
    build_gue_projection,
    build_operator,
    build_psi_pair,
)
from nibm.hermite import gue_projection_entry


def excursion_entry(c: float, terms: int = 80) -> float:
    """Closed form of the single-path excursion operator entry.

    The reflected overlap of phi_1 with itself about k c equals
    (2 k^2 c^2 - 1) e^{-k^2 c^2}, so the image series can be summed
    directly.
    """
    return sum(2.0 * (2.0 * (k * c) ** 2 - 1.0) * math.exp(-((k * c) ** 2)) for k in range(1, terms))


def reflected_entry(c: float, terms: int = 80) -> float:
    return sum(2.0 * (-1.0) ** (k + 1) * math.exp(-((k * c) ** 2)) for k in range(1, terms))


class TestModelKind:
    def test_index_sets(self):
        np.testing.assert_array_equal(ModelKind.BB.hermite_indices(4), [0, 1, 2, 3])
        np.testing.assert_array_equal(ModelKind.BE.hermite_indices(4), [1, 3, 5, 7])
        np.testing.assert_array_equal(ModelKind.RBB.hermite_indices(4), [0, 2, 4, 6])

    def test_coercion(self):
        assert _coerce_model("bb") is ModelKind.BB
        assert _coerce_model("RBB") is ModelKind.RBB
        assert _coerce_model(ModelKind.BE) is ModelKind.BE
        with pytest.raises(InvalidArgumentError):
            _coerce_model("brownian")


class TestBuildOperator:
    def test_single_bridge_entry_is_gaussian(self):
        for c in (0.4, 1.0, 2.7):
            op = build_operator("bb", 1, c)
            assert op.entries.entries[0, 0] == pytest.approx(math.exp(-c * c), rel=1e-13)
            assert op.truncation_terms == 1

    @pytest.mark.parametrize("c", [0.6, 1.1, 2.0])
    def test_single_excursion_entry(self, c):
        op = build_operator("be", 1, c)
        assert op.entries.entries[0, 0] == pytest.approx(excursion_entry(c), rel=1e-11, abs=1e-14)

    @pytest.mark.parametrize("c", [0.6, 1.1, 2.0])
    def test_single_reflected_entry(self, c):
        op = build_operator("rbb", 1, c)
        assert op.entries.entries[0, 0] == pytest.approx(reflected_entry(c), rel=1e-11, abs=1e-14)

    def test_entries_are_exactly_symmetric(self):
        op = build_operator("bb", 5, 1.3)
        np.testing.assert_array_equal(op.entries.entries, op.entries.entries.T)

    def test_tightening_tol_is_stable(self):
        loose = build_operator("be", 3, 0.8, tol=1e-10).entries.entries
        tight = build_operator("be", 3, 0.8, tol=1e-15).entries.entries
        assert float(np.max(np.abs(loose - tight))) < 1e-10
        assert build_operator("be", 3, 0.8, tol=1e-15).truncation_terms >= build_operator(
            "be", 3, 0.8, tol=1e-10
        ).truncation_terms

    @pytest.mark.parametrize(
        "model,n,c", [("bb", 4, 2.8), ("bb", 8, 4.0), ("be", 3, 3.5), ("rbb", 5, 4.5), ("rbb", 2, 2.8)]
    )
    def test_spectrum_inside_unit_disc(self, model, n, c):
        """Near the typical maximum the finite matrix inherits the
        contraction property of the operator, so det(I - M) is a
        probability.  (Deep in the left tail truncation lets eigenvalues
        spill past 1; the determinant clip absorbs that.)"""
        op = build_operator(model, n, c)
        eig = np.linalg.eigvalsh(op.entries.entries)
        assert float(np.max(np.abs(eig))) <= 1.0 + 1e-10
        det = float(np.linalg.det(np.eye(n) - op.entries.entries))
        assert -1e-12 <= det <= 1.0 + 1e-12

    def test_vanishing_barrier_limit(self):
        """As the barrier collapses, reflection about it turns into plain
        reflection, whose matrix on the Hermite basis is diag((-1)^j)."""
        op = build_operator("bb", 4, 1e-8)
        np.testing.assert_allclose(op.entries.entries, np.diag([1.0, -1.0, 1.0, -1.0]), atol=1e-6)

    def test_half_line_tiny_barrier_rejected(self):
        with pytest.raises(SeriesTooSlowError):
            build_operator("be", 2, 1e-3)
        with pytest.raises(SeriesTooSlowError):
            build_operator("rbb", 2, 5e-4)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            build_operator("bb", 0, 1.0)
        with pytest.raises(InvalidArgumentError):
            build_operator("bb", 2, -1.0)
        with pytest.raises(InvalidArgumentError):
            build_operator("bb", 2, 1.0, tol=1e-1)


class TestGueProjection:
    def test_smallest_case_is_half(self):
        op = build_gue_projection(1, 0.0)
        assert op.entries.entries[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_far_left_threshold_gives_identity(self):
        op = build_gue_projection(3, -40.0)
        np.testing.assert_allclose(op.entries.entries, np.eye(3), atol=1e-12)

    def test_matches_entrywise_builder(self):
        """The batched matrix and the scalar projection entries are
        separate code paths and must agree."""
        s = 0.35
        op = build_gue_projection(4, s)
        for i in range(4):
            for j in range(4):
                assert op.entries.entries[i, j] == pytest.approx(
                    gue_projection_entry(i, j, s), rel=1e-11, abs=1e-13
                )

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            build_gue_projection(0, 0.0)
        with pytest.raises(InvalidArgumentError):
            build_gue_projection(2, 200.0)


class TestPsiPair:
    def test_time_reflection_swaps_sides(self):
        a = build_psi_pair("bb", 3, 1.2, 0.3)
        b = build_psi_pair("bb", 3, 1.2, 0.7)
        for x, y in zip(a.u, b.v):
            assert x.sign == y.sign
            assert x.log_mag == pytest.approx(y.log_mag, abs=1e-12)
        for x, y in zip(a.v, b.u):
            assert x.sign == y.sign
            assert x.log_mag == pytest.approx(y.log_mag, abs=1e-12)

    def test_middle_time_is_self_dual(self):
        pair = build_psi_pair("rbb", 2, 1.5, 0.5)
        assert pair.tau == 0.0
        for x, y in zip(pair.u, pair.v):
            assert x.sign == y.sign and x.log_mag == y.log_mag

    def test_single_bridge_closed_form(self):
        """For one bridge the whole vector reduces to a Gaussian factor:
        u_0 = -sqrt(2) g^{3/2} r e^{-tau} phi_0(r cosh tau), g = sqrt(2) cosh tau."""
        m, t = 0.9, 0.37
        pair = build_psi_pair("bb", 1, m, t)
        r = math.sqrt(2.0) * m
        tau = 0.5 * math.log(t / (1.0 - t))
        g = math.sqrt(2.0) * math.cosh(tau)
        xi = r * math.cosh(tau)
        expected = -math.sqrt(2.0) * g**1.5 * r * math.exp(-tau) * math.pi**-0.25 * math.exp(-xi * xi / 2.0)
        assert pair.u[0].to_float() == pytest.approx(expected, rel=1e-12)

    def test_reflected_series_collapses_at_large_height(self):
        """Far from the wall only the first image survives, with weight 2."""
        m, t = 4.0, 0.44
        pair = build_psi_pair("rbb", 1, m, t)
        r = math.sqrt(2.0) * m
        tau = 0.5 * math.log(t / (1.0 - t))
        g = math.sqrt(2.0) * math.cosh(tau)
        xi = r * math.cosh(tau)
        single = -math.sqrt(2.0) * g**1.5 * r * math.exp(-tau) * math.pi**-0.25 * math.exp(-xi * xi / 2.0)
        assert pair.u[0].to_float() == pytest.approx(2.0 * single, rel=1e-8)

    def test_tau_definition(self):
        pair = build_psi_pair("be", 2, 1.0, 0.8)
        assert pair.tau == pytest.approx(0.5 * math.log(4.0), rel=1e-15)

    def test_tiny_height_rejected_for_half_line(self):
        with pytest.raises(SeriesTooSlowError):
            build_psi_pair("be", 2, 5e-4, 0.5)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            build_psi_pair("bb", 2, -1.0, 0.5)
        with pytest.raises(InvalidArgumentError):
            build_psi_pair("bb", 2, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            build_psi_pair("bb", 2, 1.0, 0.5, tol=1.0)
