"""Samplers for Wishart spectra, Dyson bridges and conditioned paths."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import kstest, norm

from nibm._errors import InvalidArgumentError, SamplingError
from nibm.distributions import loe_cdf
from nibm.montecarlo import (
    PathEnsembleSample,
    ecdf_ks,
    rng_stream,
    sample_bridge,
    sample_dyson_bridge,
    sample_excursion,
    sample_reflected_bridge,
    sample_wishart_max,
)


def bridge_max_cdf(x):
    return 1.0 - np.exp(-2.0 * np.clip(x, 0.0, None) ** 2)


def kolmogorov_cdf(m: float, terms: int = 200) -> float:
    if m <= 0.0:
        return 0.0
    return 1.0 - 2.0 * sum((-1.0) ** (k + 1) * math.exp(-2.0 * (k * m) ** 2) for k in range(1, terms))


def excursion_max_cdf(m: float, terms: int = 200) -> float:
    if m <= 0.0:
        return 0.0
    return 1.0 - sum(
        2.0 * (4.0 * (k * m) ** 2 - 1.0) * math.exp(-2.0 * (k * m) ** 2) for k in range(1, terms)
    )


class TestRngStream:
    def test_reproducible(self):
        a = rng_stream(1234, 5).standard_normal(16)
        b = rng_stream(1234, 5).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = rng_stream(1234, 0).standard_normal(16)
        b = rng_stream(1234, 1).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_seed_bounds(self):
        rng_stream(2**64 - 1, 0)
        rng_stream(0, 2**64 - 1)
        with pytest.raises(InvalidArgumentError):
            rng_stream(2**64, 0)
        with pytest.raises(InvalidArgumentError):
            rng_stream(-1, 0)
        with pytest.raises(InvalidArgumentError):
            rng_stream(1.5, 0)
        with pytest.raises(InvalidArgumentError):
            rng_stream(True, 0)


class TestWishart:
    def test_shape_and_determinism(self):
        a = sample_wishart_max(3, 500, seed=7)
        b = sample_wishart_max(3, 500, seed=7)
        c = sample_wishart_max(3, 500, seed=7, stream=1)
        assert a.shape == (500,)
        assert np.all(a > 0.0)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_chunking_is_invisible(self):
        # 2 x 1 matrices draw sample-by-sample through the chunk loop;
        # the stream must not depend on how work was split.
        a = sample_wishart_max(1, 50, seed=7)
        b = sample_wishart_max(1, 50, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_single_column_is_chi_squared(self):
        samples = sample_wishart_max(1, 20000, seed=23)
        assert ecdf_ks(samples, lambda x: 1.0 - np.exp(-x / 2.0)) < 0.015

    def test_three_columns_match_bridge_law(self):
        samples = sample_wishart_max(3, 8000, seed=17)
        xs = np.linspace(samples.min() * 0.9, samples.max() * 1.1, 257)
        table = np.array([loe_cdf(3, float(x)) for x in xs])
        assert ecdf_ks(samples, lambda v: np.interp(v, xs, table)) < 0.025

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            sample_wishart_max(0, 10, seed=1)
        with pytest.raises(InvalidArgumentError):
            sample_wishart_max(2, 0, seed=1)
        with pytest.raises(InvalidArgumentError):
            sample_wishart_max(2, 10_000_001, seed=1)


class TestDysonBridge:
    def test_sample_fields_and_determinism(self):
        s = sample_dyson_bridge(2, 200, 64, seed=3, stream=4)
        assert isinstance(s, PathEnsembleSample)
        assert (s.n_paths, s.n_steps, s.seed, s.stream) == (2, 64, 3, 4)
        assert s.max_height.shape == s.argmax_time.shape == (200,)
        assert np.all(s.max_height >= 0.0)
        assert np.all((s.argmax_time >= 0.0) & (s.argmax_time < 1.0))
        again = sample_dyson_bridge(2, 200, 64, seed=3, stream=4)
        np.testing.assert_array_equal(s.max_height, again.max_height)

    def test_single_path_matches_bridge_maximum(self):
        """One Dyson path is a Brownian bridge after the time change; its
        grid maximum sits within the known O(steps^{-1/2}) bias of the
        continuum law, and refining the grid shrinks the distance."""
        coarse = sample_dyson_bridge(1, 4000, 256, seed=11)
        fine = sample_dyson_bridge(1, 4000, 1024, seed=11)
        ks_coarse = ecdf_ks(coarse.max_height, bridge_max_cdf)
        ks_fine = ecdf_ks(fine.max_height, bridge_max_cdf)
        assert ks_coarse < 0.08
        assert ks_fine < ks_coarse

    def test_single_path_argmax_is_uniform(self):
        s = sample_dyson_bridge(1, 4000, 1024, seed=11)
        assert ecdf_ks(s.argmax_time, lambda u: np.clip(u, 0.0, 1.0)) < 0.04

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            sample_dyson_bridge(0, 10, 64, seed=1)
        with pytest.raises(InvalidArgumentError):
            sample_dyson_bridge(2, 10, 3, seed=1)
        with pytest.raises(InvalidArgumentError):
            sample_dyson_bridge(51, 10, 64, seed=1)


class TestBridgeSamplers:
    def test_bridge_endpoints_and_shape(self):
        paths = sample_bridge(300, 64, seed=29)
        assert paths.shape == (300, 65)
        assert np.all(paths[:, 0] == 0.0) and np.all(paths[:, -1] == 0.0)

    def test_bridge_midpoint_marginal(self):
        paths = sample_bridge(20000, 64, seed=29)
        standardized = paths[:, 32] / 0.5
        assert ecdf_ks(standardized, norm.cdf) < 0.025

    def test_reflected_bridge_is_absolute_value(self):
        paths = sample_reflected_bridge(200, 32, seed=31)
        raw = sample_bridge(200, 32, seed=31)
        np.testing.assert_array_equal(paths, np.abs(raw))

    def test_reflected_maximum_law(self):
        paths = sample_reflected_bridge(5000, 512, seed=3)
        ks = ecdf_ks(
            paths.max(axis=1), lambda xs: np.array([kolmogorov_cdf(float(x)) for x in xs])
        )
        assert ks < 0.08


class TestExcursion:
    def test_positive_interior_and_determinism(self):
        paths = sample_excursion(120, 64, seed=5)
        assert paths.shape == (120, 65)
        assert np.all(paths[:, 0] == 0.0) and np.all(paths[:, -1] == 0.0)
        assert np.all(paths[:, 1:-1] > 0.0)
        again = sample_excursion(120, 64, seed=5)
        np.testing.assert_array_equal(paths, again)

    def test_maximum_law_improves_with_resolution(self):
        coarse = sample_excursion(2500, 32, seed=5)
        fine = sample_excursion(2500, 256, seed=5)
        oracle = lambda xs: np.array([excursion_max_cdf(float(x)) for x in xs])
        ks_coarse = ecdf_ks(coarse.max(axis=1), oracle)
        ks_fine = ecdf_ks(fine.max(axis=1), oracle)
        assert ks_fine < ks_coarse
        assert ks_fine < 0.15

    def test_attempt_budget(self):
        with pytest.raises(SamplingError):
            sample_excursion(50, 256, seed=1, max_attempts=1000)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            sample_excursion(10, 48, seed=1)
        with pytest.raises(InvalidArgumentError):
            sample_excursion(10, 1, seed=1)


class TestEcdfKs:
    def test_hand_case(self):
        # two points at 1 and 2 against F(x) = x/4: the largest gap is
        # |F(2) - 1| = 1/2
        assert ecdf_ks(np.array([1.0, 2.0]), lambda x: np.asarray(x) / 4.0) == pytest.approx(0.5)

    def test_matches_reference_implementation(self):
        samples = rng_stream(41).standard_normal(1000)
        mine = ecdf_ks(samples, norm.cdf)
        ref = kstest(samples, norm.cdf).statistic
        assert mine == pytest.approx(ref, abs=1e-12)

    def test_scalar_cdf_fallback(self):
        samples = np.array([0.1, 0.6, 0.9])
        mine = ecdf_ks(samples, lambda x: float(np.clip(x, 0.0, 1.0)))
        ref = kstest(samples, lambda x: np.clip(x, 0.0, 1.0)).statistic
        assert mine == pytest.approx(ref, abs=1e-15)

    def test_bad_input(self):
        with pytest.raises(InvalidArgumentError):
            ecdf_ks(np.array([]), lambda x: x)
        with pytest.raises(InvalidArgumentError):
            ecdf_ks(np.array([1.0, np.nan]), lambda x: x)
