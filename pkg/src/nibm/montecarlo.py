"""Monte Carlo reference samplers for the path ensembles.

Everything here exists to cross-check the determinantal formulas against
brute-force randomness, so determinism matters more than speed: every
sampler is driven by a Philox generator keyed by ``(seed, stream)`` and
identical inputs reproduce identical arrays bit for bit.

Two routes sample the non-intersecting bridge ensemble.  The Wishart
route draws (N+1) x N Gaussian matrices, whose largest singular value
squared follows the same law as the squared maximum height.  The Dyson
route runs a stationary Hermitian Ornstein-Uhlenbeck process and maps
its top eigenvalue through a time change onto the top bridge path; this
one resolves the whole trajectory, so it also samples the argmax
location.  Single-path samplers (plain, reflected, excursion) cover the
N = 1 models directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidArgumentError, SamplingError

_MAX_SAMPLES = 10_000_000

__all__ = [
    "PathEnsembleSample",
    "rng_stream",
    "sample_wishart_max",
    "sample_dyson_bridge",
    "sample_bridge",
    "sample_reflected_bridge",
    "sample_excursion",
    "ecdf_ks",
]


def _check_count(name: str, value, upper: int = _MAX_SAMPLES) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 1 <= value <= upper:
        raise InvalidArgumentError(f"{name} must lie in 1..{upper}, got {value}")
    return value


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for the given seed and substream.

    Distinct streams of one seed are statistically independent, which is
    what lets a parallel run split work without coordinating state.
    """
    for name, value in (("seed", seed), ("stream", stream)):
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
        if not 0 <= int(value) < 2**64:
            raise InvalidArgumentError(f"{name} must fit in 64 unsigned bits, got {value}")
    key = np.array([int(seed), int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_wishart_max(n_paths: int, n_samples: int, seed: int, stream: int = 0) -> np.ndarray:
    """Largest eigenvalues of (N+1) x N Gaussian Wishart matrices.

    Each draw is the top eigenvalue of X^T X with X an (N+1) x N matrix
    of independent standard normals; its law equals that of the squared
    scaled maximum of N non-intersecting bridges (see ``loe_cdf``).
    """
    n_paths = _check_count("n_paths", n_paths, 500)
    n_samples = _check_count("n_samples", n_samples)
    rng = rng_stream(seed, stream)
    out = np.empty(n_samples)
    # Chunked so memory stays modest at large sample counts.
    chunk = max(1, min(n_samples, 2_000_000 // ((n_paths + 1) * n_paths + 1)))
    done = 0
    while done < n_samples:
        take = min(chunk, n_samples - done)
        x = rng.standard_normal((take, n_paths + 1, n_paths))
        gram = np.einsum("sij,sik->sjk", x, x)
        out[done : done + take] = np.linalg.eigvalsh(gram)[:, -1]
        done += take
    return out


@dataclass(frozen=True)
class PathEnsembleSample:
    """Maximum heights and argmax locations from simulated top paths."""

    n_paths: int
    n_steps: int
    seed: int
    stream: int
    max_height: np.ndarray
    argmax_time: np.ndarray


def _hermitian_stationary(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Draws from the stationary matrix law, eigenvalue density ~ prod e^{-x^2}.

    In entries: real N(0, 1/2) diagonals, complex off-diagonals with
    N(0, 1/4) real and imaginary parts.
    """
    h = np.zeros((count, dim, dim), dtype=complex)
    idx = np.arange(dim)
    h[:, idx, idx] = rng.normal(0.0, math.sqrt(0.5), (count, dim))
    if dim > 1:
        iu, ju = np.triu_indices(dim, 1)
        re = rng.normal(0.0, 0.5, (count, iu.size))
        im = rng.normal(0.0, 0.5, (count, iu.size))
        h[:, iu, ju] = re + 1j * im
        h[:, ju, iu] = re - 1j * im
    return h


def sample_dyson_bridge(
    n_paths: int, n_samples: int, n_steps: int, seed: int, stream: int = 0
) -> PathEnsembleSample:
    """Simulate top paths of the non-intersecting bridge ensemble.

    A stationary Hermitian Ornstein-Uhlenbeck process A(s) is stepped
    exactly on the time grid s(u) = log(u/(1-u))/2 for u on a uniform
    grid of ``n_steps`` cells; the top bridge path is the time-changed
    top eigenvalue sech(s) lambda_max(A(s)) / sqrt(2).  Discretization
    touches only the grid resolution of the max and argmax, never the
    finite-dimensional laws, which are exact.
    """
    n_paths = _check_count("n_paths", n_paths, 50)
    n_samples = _check_count("n_samples", n_samples, 1_000_000)
    n_steps = _check_count("n_steps", n_steps, 1_000_000)
    if n_steps < 4:
        raise InvalidArgumentError(f"n_steps must be at least 4, got {n_steps}")
    rng = rng_stream(seed, stream)
    u_grid = np.arange(1, n_steps) / n_steps
    s_grid = 0.5 * np.log(u_grid / (1.0 - u_grid))
    damp = 1.0 / np.cosh(s_grid) / math.sqrt(2.0)

    best = np.zeros(n_samples)
    best_u = np.zeros(n_samples)
    a = _hermitian_stationary(rng, n_samples, n_paths)
    for j in range(u_grid.size):
        if j > 0:
            ds = s_grid[j] - s_grid[j - 1]
            decay = math.exp(-ds)
            fresh = _hermitian_stationary(rng, n_samples, n_paths)
            a = decay * a + math.sqrt(1.0 - decay * decay) * fresh
        top = np.linalg.eigvalsh(a)[:, -1]
        height = damp[j] * top
        gain = height > best
        best = np.where(gain, height, best)
        best_u = np.where(gain, u_grid[j], best_u)
    return PathEnsembleSample(
        n_paths=n_paths,
        n_steps=n_steps,
        seed=int(seed),
        stream=int(stream),
        max_height=best,
        argmax_time=best_u,
    )


def sample_bridge(n_samples: int, n_steps: int, seed: int, stream: int = 0) -> np.ndarray:
    """Standard Brownian bridge paths on a uniform grid, shape (samples, steps + 1)."""
    n_samples = _check_count("n_samples", n_samples, 1_000_000)
    n_steps = _check_count("n_steps", n_steps, 1 << 20)
    rng = rng_stream(seed, stream)
    steps = rng.normal(0.0, math.sqrt(1.0 / n_steps), (n_samples, n_steps))
    walk = np.cumsum(steps, axis=1)
    frac = np.arange(1, n_steps + 1) / n_steps
    paths = np.empty((n_samples, n_steps + 1))
    paths[:, 0] = 0.0
    paths[:, 1:] = walk - frac * walk[:, -1:]
    paths[:, -1] = 0.0
    return paths


def sample_reflected_bridge(n_samples: int, n_steps: int, seed: int, stream: int = 0) -> np.ndarray:
    """Absolute value of Brownian bridge paths."""
    return np.abs(sample_bridge(n_samples, n_steps, seed, stream))


def sample_excursion(
    n_samples: int,
    n_steps: int,
    seed: int,
    stream: int = 0,
    max_attempts: int = 1_000_000,
) -> np.ndarray:
    """Brownian bridge paths conditioned positive at all interior grid points.

    Sampling is rejection on grid positivity, refined level by level:
    each dyadic level fills in conditionally Gaussian midpoints and
    discards failing paths before finer (more expensive) levels are
    drawn.  The surviving law equals flat rejection of full bridges.
    ``n_steps`` must be a power of two.  Raises :class:`SamplingError`
    once more than ``max_attempts`` bridges have been started.
    """
    n_samples = _check_count("n_samples", n_samples, 1_000_000)
    n_steps = _check_count("n_steps", n_steps, 1 << 16)
    if n_steps & (n_steps - 1) or n_steps < 2:
        raise InvalidArgumentError(f"n_steps must be a power of two >= 2, got {n_steps}")
    max_attempts = _check_count("max_attempts", max_attempts, 1 << 62)
    rng = rng_stream(seed, stream)
    levels = n_steps.bit_length() - 1
    kept: list[np.ndarray] = []
    total_kept = 0
    attempts = 0
    while total_kept < n_samples:
        # Grid positivity of an n-point bridge has probability exactly
        # 1/n (cycle lemma), so size batches to the expected need.
        batch = min(max((n_samples - total_kept) * n_steps, 256), 1 << 17)
        attempts += batch
        if attempts > max_attempts:
            raise SamplingError(
                f"excursion sampler exceeded {max_attempts} attempted bridges"
            )
        paths = np.zeros((batch, n_steps + 1))
        alive = np.ones(batch, dtype=bool)
        for level in range(levels):
            spacing = n_steps >> level
            half = spacing >> 1
            left = paths[:, 0 : n_steps : spacing]
            right = paths[:, spacing : n_steps + 1 : spacing]
            mean = 0.5 * (left + right)
            sd = math.sqrt(half / n_steps / 2.0)
            mids = mean + rng.normal(0.0, sd, mean.shape)
            paths[:, half : n_steps + 1 : spacing] = mids
            alive &= np.all(mids > 0.0, axis=1)
            if not np.any(alive):
                break
            # Collapsing to survivors here would desynchronize the draw
            # count from the level structure; a mask is cheap enough.
        survivors = paths[alive]
        if survivors.size:
            kept.append(survivors)
            total_kept += survivors.shape[0]
    return np.concatenate(kept, axis=0)[:n_samples]


def ecdf_ks(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance between an empirical sample and a CDF.

    ``cdf`` is called on the sorted sample values; the statistic is the
    sup over both one-sided gaps at each data point.
    """
    data = np.sort(np.asarray(samples, dtype=float).ravel())
    if data.size == 0:
        raise InvalidArgumentError("samples must be non-empty")
    if not np.all(np.isfinite(data)):
        raise InvalidArgumentError("samples must be finite")
    n = data.size
    try:
        values = np.asarray(cdf(data), dtype=float)
        if values.shape != data.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.array([float(cdf(x)) for x in data])
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(upper - values), np.abs(lower - values))))