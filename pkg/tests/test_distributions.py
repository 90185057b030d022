"""Finite-N distribution functions: CDFs, joint densities and argmax laws."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from nibm._errors import InvalidArgumentError, PrecisionWindowError
from nibm.distributions import (
    ENVELOPE_RATE,
    EPSILON_LARGE,
    EPSILON_SMALL,
    argmax_marginal,
    argmax_tail,
    gue_cdf,
    gue_tail_neglog,
    joint_density,
    joint_density_grid,
    loe_cdf,
    max_cdf,
    tail_envelope_report,
)


def bridge_max_cdf(m: float) -> float:
    return 1.0 - math.exp(-2.0 * m * m)


def excursion_max_cdf(m: float, terms: int = 200) -> float:
    return 1.0 - sum(
        2.0 * (4.0 * (k * m) ** 2 - 1.0) * math.exp(-2.0 * (k * m) ** 2) for k in range(1, terms)
    )


def kolmogorov_cdf(m: float, terms: int = 200) -> float:
    return 1.0 - 2.0 * sum((-1.0) ** (k + 1) * math.exp(-2.0 * (k * m) ** 2) for k in range(1, terms))


def bridge_joint_density(m: float, t: float) -> float:
    v = t * (1.0 - t)
    return math.sqrt(2.0 / math.pi) * m * m * v**-1.5 * math.exp(-m * m / (2.0 * v))


class TestMaxCdf:
    @pytest.mark.parametrize("m", [0.3, 0.8, 1.5, 2.5])
    def test_single_bridge(self, m):
        assert max_cdf("bb", 1, m) == pytest.approx(bridge_max_cdf(m), rel=1e-13)

    @pytest.mark.parametrize("m", [0.5, 1.0, 1.8])
    def test_single_excursion(self, m):
        assert max_cdf("be", 1, m) == pytest.approx(excursion_max_cdf(m), rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("m", [0.5, 1.0, 1.8])
    def test_single_reflected_bridge(self, m):
        assert max_cdf("rbb", 1, m) == pytest.approx(kolmogorov_cdf(m), rel=1e-12, abs=1e-15)

    def test_edge_values(self):
        assert max_cdf("bb", 3, 0.0) == 0.0
        assert max_cdf("bb", 3, -2.0) == 0.0
        assert max_cdf("rbb", 4, 50.0) == 1.0
        # Heights too small for the reflection series are reported as
        # (effectively exact) zero rather than an error.
        assert max_cdf("be", 2, 5e-4) == 0.0

    def test_deep_left_tail_is_clipped_not_negative(self):
        v = max_cdf("rbb", 5, 1.2 / math.sqrt(2.0))
        assert 0.0 <= v <= 1e-6

    @given(
        model=st.sampled_from(["bb", "be", "rbb"]),
        n=st.integers(min_value=1, max_value=4),
        a=st.floats(min_value=0.15, max_value=6.0),
        b=st.floats(min_value=0.15, max_value=6.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_monotone_probability(self, model, n, a, b):
        lo, hi = sorted((a, b))
        p_lo, p_hi = max_cdf(model, n, lo), max_cdf(model, n, hi)
        assert 0.0 <= p_lo <= p_hi <= 1.0

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            max_cdf("bb", 0, 1.0)
        with pytest.raises(InvalidArgumentError):
            max_cdf("ginibre", 2, 1.0)
        with pytest.raises(InvalidArgumentError):
            max_cdf("bb", 2, 1.0, tol=0.5)


class TestLoeCdf:
    def test_single_path_is_chi_squared(self):
        for x in (0.2, 1.0, 3.5, 8.0):
            assert loe_cdf(1, x) == pytest.approx(1.0 - math.exp(-x / 2.0), rel=1e-12)

    def test_matches_bridge_ensemble(self):
        """The largest-eigenvalue law and the bridge-maximum law are the
        same function under x = 4 m^2; the two entry points do their
        scaling arithmetic independently."""
        for x in (0.5, 2.0, 7.0):
            assert loe_cdf(3, x) == pytest.approx(max_cdf("bb", 3, math.sqrt(x) / 2.0), rel=1e-12)

    def test_edges(self):
        assert loe_cdf(2, 0.0) == 0.0
        assert loe_cdf(2, -1.0) == 0.0
        assert loe_cdf(2, 1e4) == 1.0
        with pytest.raises(InvalidArgumentError):
            loe_cdf(0, 1.0)


class TestGueCdf:
    def test_single_matrix_is_erf(self):
        for s in (-1.0, 0.0, 0.3, 2.0):
            assert gue_cdf(1, s) == pytest.approx(0.5 * (1.0 + math.erf(s)), rel=1e-13)

    def test_two_by_two_frozen_values(self):
        # High-precision reference values for the 2x2 largest-eigenvalue
        # CDF, computed once by 50-digit quadrature of the eigenvalue
        # density and frozen.
        assert gue_cdf(2, 0.8) == pytest.approx(0.507172869632491532, rel=1e-13)
        assert gue_cdf(2, 0.0) == pytest.approx(0.0908450569081046642, rel=1e-13)
        assert gue_cdf(2, 2.0) == pytest.approx(0.974655696770717441, rel=1e-13)

    def test_range_and_monotonicity(self):
        grid = np.linspace(-3.0, 4.0, 40)
        vals = [gue_cdf(3, s) for s in grid]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(x <= y for x, y in zip(vals, vals[1:]))
        assert gue_cdf(3, -40.0) < 1e-12
        assert gue_cdf(3, 40.0) == pytest.approx(1.0, abs=1e-14)

    def test_tail_neglog_matches_cdf_at_moderate_arguments(self):
        for s in (0.0, 1.0, 2.5):
            assert gue_tail_neglog(2, s) == pytest.approx(-math.log(1.0 - gue_cdf(2, s)), rel=1e-10)

    def test_tail_neglog_survives_where_cdf_saturates(self):
        """Past s ~ 6 the direct 1 - CDF hits rounding; the log-space
        route must keep producing finite, growing values."""
        a, b = gue_tail_neglog(2, 8.0), gue_tail_neglog(2, 14.0)
        assert math.isfinite(a) and math.isfinite(b)
        assert 50.0 < a < b

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            gue_cdf(0, 1.0)
        with pytest.raises(InvalidArgumentError):
            gue_tail_neglog(-1, 1.0)


class TestJointDensity:
    @pytest.mark.parametrize("m,t", [(0.7, 0.3), (1.2, 0.5), (0.9, 0.83), (2.0, 0.5)])
    def test_single_bridge_closed_form(self, m, t):
        assert joint_density("bb", 1, m, t) == pytest.approx(bridge_joint_density(m, t), rel=1e-12)

    @pytest.mark.parametrize(
        "model,n,m", [("bb", 3, 1.7), ("be", 3, 2.4), ("rbb", 4, 2.9), ("bb", 6, 2.4)]
    )
    def test_time_reflection_symmetry(self, model, n, m):
        for t in (0.21, 0.38):
            assert joint_density(model, n, m, t) == pytest.approx(
                joint_density(model, n, m, 1.0 - t), rel=1e-9
            )

    @pytest.mark.parametrize(
        "model,n,m,t", [("bb", 4, 2.1, 0.35), ("be", 2, 1.9, 0.62), ("rbb", 5, 3.2, 0.5)]
    )
    def test_trace_and_difference_routes_agree(self, model, n, m, t):
        a = joint_density(model, n, m, t, method="trace")
        b = joint_density(model, n, m, t, method="difference")
        assert a == pytest.approx(b, rel=1e-9)

    def test_mode_handoff_is_smooth(self):
        """Around t ~ 0.967 the 20-path evaluation switches its arithmetic
        mode.  The log-density slope must drift smoothly through that
        point; a kink would show up as an outlier jump."""
        m = math.sqrt(20.0)
        ts = [0.9670 + 2e-4 * k for k in range(6)]
        logs = [math.log(joint_density("bb", 20, m, t)) for t in ts]
        slopes = np.diff(logs)
        jumps = np.abs(np.diff(slopes))
        assert np.max(np.abs(jumps - jumps.mean())) < 0.2 * jumps.mean()

    def test_precision_window_guard(self):
        with pytest.raises(PrecisionWindowError):
            joint_density("bb", 200, 14.0, 0.999)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            joint_density("bb", 2, -1.0, 0.5)
        with pytest.raises(InvalidArgumentError):
            joint_density("bb", 2, 101.0, 0.5)
        with pytest.raises(InvalidArgumentError):
            joint_density("bb", 2, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            joint_density("bb", 2, 1.0, 0.5, method="adjoint")
        with pytest.raises(InvalidArgumentError):
            joint_density("bb", 201, 1.0, 0.5)


class TestArgmaxMarginal:
    def test_single_bridge_argmax_is_uniform(self):
        for t in (0.1, 0.4, 0.75):
            assert argmax_marginal("bb", 1, t) == pytest.approx(1.0, rel=1e-9)

    def test_symmetry(self):
        assert argmax_marginal("bb", 3, 0.3) == pytest.approx(argmax_marginal("bb", 3, 0.7), rel=1e-9)
        assert argmax_marginal("rbb", 2, 0.25) == pytest.approx(
            argmax_marginal("rbb", 2, 0.75), rel=1e-9
        )

    def test_concentration_grows_with_paths(self):
        assert argmax_marginal("bb", 6, 0.5) > argmax_marginal("bb", 2, 0.5) > 1.0

    def test_squeeze_regression(self):
        # Deep squeeze anchor: two bridges pinned near t = 1.  Frozen from
        # a run cross-checked against the extended-precision route.
        assert argmax_marginal("bb", 2, 0.999) == pytest.approx(1.1865096257689623e-4, rel=1e-6)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            argmax_marginal("bb", 2, 0.0)


class TestArgmaxTail:
    def test_single_bridge_tail_is_linear(self):
        for eps in (0.05, 0.2, 0.4):
            assert argmax_tail("bb", 1, eps) == pytest.approx(1.0 - 2.0 * eps, rel=1e-9)

    def test_matches_direct_marginal_integration(self):
        """Independent route: integrate the location marginal over the
        tail window with a dense Simpson rule."""
        ts = np.linspace(0.95, 0.99995, 81)
        vals = [argmax_marginal("bb", 3, float(t)) for t in ts]
        assert argmax_tail("bb", 3, 0.45) == pytest.approx(2.0 * simpson(vals, x=ts), rel=1e-6)

    def test_three_bridge_regression_values(self):
        assert argmax_tail("bb", 3, 0.45) == pytest.approx(4.047885067897e-4, rel=1e-6)
        assert argmax_tail("bb", 3, 0.48) == pytest.approx(3.759350948693e-6, rel=1e-6)
        assert argmax_tail("bb", 3, 0.49) == pytest.approx(7.985053615662e-8, rel=1e-6)

    def test_monotone_in_epsilon(self):
        vals = [argmax_tail("rbb", 2, e) for e in (0.1, 0.2, 0.3, 0.45)]
        assert all(x > y > 0.0 for x, y in zip(vals, vals[1:]))

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            argmax_tail("bb", 2, 0.0)
        with pytest.raises(InvalidArgumentError):
            argmax_tail("bb", 2, 0.5)


class TestTailEnvelopeReport:
    def test_fields_are_self_consistent(self):
        rep = tail_envelope_report(3, (0.30, 0.35))
        assert rep.n_paths == 3
        assert rep.upper_rate_constant == ENVELOPE_RATE
        assert rep.small_eps_threshold == EPSILON_SMALL
        assert rep.large_eps_threshold == EPSILON_LARGE
        threshold = ENVELOPE_RATE * (1.0 + 3.0 * 3 ** (-1.0 / 3.0))
        for e, p, nl, rate, flag in zip(
            rep.epsilons, rep.probabilities, rep.neg_log_probabilities, rep.envelope_rate, rep.rate_flags
        ):
            assert p == pytest.approx(argmax_tail("bb", 3, e), rel=1e-12)
            assert nl == pytest.approx(-math.log(p), rel=1e-12)
            assert rate == pytest.approx(nl / (3 * e**3), rel=1e-12)
            assert flag == (rate > threshold)
        assert rep.envelope_consistent == (not any(rep.rate_flags))
        assert rep.envelope_consistent

    def test_epsilon_beyond_envelope_window_rejected(self):
        with pytest.raises(InvalidArgumentError):
            tail_envelope_report(3, (0.39,))
        with pytest.raises(InvalidArgumentError):
            tail_envelope_report(3, ())


class TestJointDensityGrid:
    def test_bridge_grid_is_normalized_and_symmetric(self):
        grid = joint_density_grid("bb", 2)
        assert grid.normalization_defect < 1e-8
        assert grid.values.shape == (grid.m_grid.size, grid.t_grid.size)
        assert np.all(grid.values >= 0.0)
        # the default time grid is symmetric about 1/2, so columns must
        # mirror
        np.testing.assert_allclose(grid.values, grid.values[:, ::-1], rtol=1e-8, atol=1e-12)

    def test_excursion_grid_normalization(self):
        grid = joint_density_grid("be", 3)
        assert grid.normalization_defect < 1e-5

    def test_custom_grids_and_thread_determinism(self):
        m_grid = np.linspace(0.8, 2.6, 7)
        t_grid = np.array([0.3, 0.5, 0.7])
        a = joint_density_grid("bb", 2, m_grid=m_grid, t_grid=t_grid, threads=1)
        b = joint_density_grid("bb", 2, m_grid=m_grid, t_grid=t_grid, threads=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_bad_grids(self):
        with pytest.raises(InvalidArgumentError):
            joint_density_grid("bb", 2, m_grid=[-1.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            joint_density_grid("bb", 2, t_grid=[0.0, 0.5])
        with pytest.raises(InvalidArgumentError):
            joint_density_grid("bb", 2, m_grid=[])
