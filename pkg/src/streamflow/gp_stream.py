"""Conditional law of (position, velocity) given pinned observations.

Given a kernel bundle over M pinned time points and the pinned values, each
data dimension carries an independent Gaussian process.  Conditioning the
joint (s_t, ds_t/dt) process on the pinned values yields, per dimension, a
bivariate normal whose 2x2 covariance is dimension-independent; only the
mean varies with the pinned values.  That structure is what makes training
draws cheap: one M x M factorization and one 2x2 eigendecomposition per
query time serve every dimension at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError
from .kernels import GramBundle

# Schur complements of nearly-singular systems can dip slightly below zero;
# anything this far negative indicates a real defect rather than roundoff.
EIGENVALUE_FLOOR = -1e-8


class MeanFunction:
    """Prior mean of one dimension of the stream; must be differentiable."""

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Return (xi(t), dxi/dt) broadcast over ``t``."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroMean(MeanFunction):
    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros_like(t), np.zeros_like(t)


@dataclass(frozen=True)
class ObservationSet:
    """M pinned time points with d-dimensional values the stream passes through."""

    times: np.ndarray
    values: np.ndarray  # (M, d)
    covariate: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) < 2:
            raise ValueError("need at least two pinned observations")
        if np.any(np.diff(times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if values.shape[0] != len(times):
            raise ValueError(
                f"{len(times)} times but {values.shape[0]} value rows"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("observation values must be finite")


@dataclass(frozen=True)
class ConditionalGaussian:
    """Per-dimension mean (2, d) and shared 2x2 covariance of (s_t, sdot_t)."""

    mean: np.ndarray  # (2, d): row 0 position, row 1 velocity
    cov: np.ndarray  # (2, 2), symmetric

    @property
    def d(self) -> int:
        return self.mean.shape[1]


@dataclass(frozen=True)
class StreamSample:
    """One draw of the stream state at time t."""

    t: float
    s: np.ndarray
    sdot: np.ndarray
    covariate: np.ndarray | None = None


def condition(
    bundle: GramBundle, mean: MeanFunction, obs: ObservationSet, t: float
) -> ConditionalGaussian:
    """Condition the joint (position, velocity) law at time ``t`` on ``obs``.

    Solves run through the bundle's cached Cholesky factor; the covariance
    Schur complement is computed once and shared across dimensions.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"query time must lie in [0, 1], got {t}")
    means, covs = _condition_arrays(bundle, mean, obs.values[None, :, :], np.array([t]))
    return ConditionalGaussian(mean=means[0], cov=covs[0])


def _condition_arrays(
    bundle: GramBundle, mean: MeanFunction, values: np.ndarray, ts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized conditioning over rows.

    values: (n, M, d) pinned values per row; ts: (n,) query times.
    Returns means (n, 2, d) and covariances (n, 2, 2).
    """
    n, M, d = values.shape
    xi_obs, _ = mean.evaluate(bundle.obs_times)
    xi_t, xidot_t = mean.evaluate(ts)

    # alpha = K^{-1} (x_obs - xi_obs), one solve covering all rows and dims
    resid = values - xi_obs[None, :, None]
    alpha = bundle.solve(resid.transpose(1, 0, 2).reshape(M, n * d))
    alpha = alpha.reshape(M, n, d).transpose(1, 0, 2)

    cross = bundle.cross_many(ts)  # (n, 2, M)
    means = np.einsum("nkm,nmd->nkd", cross, alpha)
    means[:, 0, :] += xi_t[:, None]
    means[:, 1, :] += xidot_t[:, None]

    beta = bundle.solve(cross.transpose(2, 0, 1).reshape(M, n * 2))
    beta = beta.reshape(M, n, 2).transpose(1, 0, 2)  # (n, M, 2)
    covs = bundle.point_many(ts) - np.einsum("nkm,nml->nkl", cross, beta)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return means, covs


def sample_point(cg: ConditionalGaussian, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw (s, sdot) jointly from the conditional law.

    Uses the 2x2 eigendecomposition; eigenvalues in [EIGENVALUE_FLOOR, 0)
    are clipped to zero, anything lower raises.
    """
    s, sdot = _sample_arrays(cg.mean[None, :, :], cg.cov[None, :, :], rng)
    return s[0], sdot[0]


def _sample_arrays(
    means: np.ndarray, covs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Batched joint draws: means (n, 2, d), covs (n, 2, 2) -> s, sdot (n, d).

    Eigenvalues at roundoff scale (below 1e-12 relative to the largest) are
    zeroed as exact degeneracies, so a rank-zero conditional (the straight
    interpolation path) reproduces its mean without phantom noise.
    """
    n, _, d = means.shape
    w, V = np.linalg.eigh(covs)
    if np.any(w < EIGENVALUE_FLOOR):
        raise NumericalDegeneracyError(
            f"conditional covariance has eigenvalue {w.min():.3e} below {EIGENVALUE_FLOOR}"
        )
    tiny = 1e-12 * np.maximum(1.0, w.max(axis=1, keepdims=True))
    w = np.where(w < tiny, 0.0, w)
    z = rng.standard_normal((n, 2, d))
    draws = means + np.einsum("nkl,nld->nkd", V, np.sqrt(w)[:, :, None] * z)
    return draws[:, 0, :], draws[:, 1, :]


def path_stats(
    bundle: GramBundle, mean: MeanFunction, obs: ObservationSet, grid
) -> list[tuple[float, int, float, float, float, float]]:
    """Conditional mean/sd envelope of position and velocity along a grid.

    Returns rows (t, dim, mean_s, sd_s, mean_sdot, sd_sdot); the sd columns
    repeat across dimensions because the conditional covariance is shared.
    """
    grid = np.asarray(grid, dtype=float)
    rows = []
    for t in grid:
        cg = condition(bundle, mean, obs, float(t))
        var = np.clip(np.diag(cg.cov), 0.0, None)
        sd_s, sd_sdot = np.sqrt(var)
        for dim in range(cg.d):
            rows.append(
                (float(t), dim, float(cg.mean[0, dim]), float(sd_s),
                 float(cg.mean[1, dim]), float(sd_sdot))
            )
    return rows


PATH_STATS_HEADER = "t,dim,mean_s,sd_s,mean_sdot,sd_sdot"


def write_path_stats_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(PATH_STATS_HEADER + "\n")
        for t, dim, ms, ss, md, sdd in rows:
            fh.write(f"{t:.17g},{dim},{ms:.17g},{ss:.17g},{md:.17g},{sdd:.17g}\n")
