"""Covariance kernels for the joint (position, velocity) process.

Each kernel evaluates four blocks at a pair of times (t, t2):

    c11(t, t2)                    position-position covariance
    c12(t, t2) = d c11 / d t2     position-velocity
    c21(t, t2) = d c11 / d t      velocity-position
    c22(t, t2) = d^2 c11 / dt dt2 velocity-velocity

Derivative blocks exist because differentiating a Gaussian process in time
yields another Gaussian process whose cross-covariances are kernel
derivatives.  The white-noise (nugget) kernel has no derivative process: it
contributes to c11 at coincident times only and never to c12/c21/c22.

All block functions broadcast over numpy arrays, so grid and batch
evaluation need no loops.  Everything is computed in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalDegeneracyError

DEFAULT_JITTER_SCHEDULE = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)

Blocks = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


class Kernel:
    """Base class; subclasses implement :meth:`blocks`."""

    def blocks(self, t, t2) -> Blocks:
        raise NotImplementedError

    def has_nugget(self) -> bool:
        return False


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    """c11(t, t2) = alpha * exp(-(t - t2)^2 / (2 l^2))."""

    alpha: float = 1.0
    l: float = 0.3

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"SE kernel needs alpha > 0, got {self.alpha}")
        if self.l <= 0:
            raise ConfigurationError(f"SE kernel needs l > 0, got {self.l}")

    def blocks(self, t, t2) -> Blocks:
        r = np.asarray(t, dtype=float) - np.asarray(t2, dtype=float)
        l2 = self.l * self.l
        e = self.alpha * np.exp(-0.5 * r * r / l2)
        c11 = e
        c12 = (r / l2) * e
        c21 = -c12
        c22 = (l2 - r * r) / (l2 * l2) * e
        return c11, c12, c21, c22


@dataclass(frozen=True)
class Linear(Kernel):
    """c11(t, t2) = sigma_a^2 + sigma_b^2 (t - 1)(t2 - 1).

    Conditioning this kernel on two endpoints recovers the straight-line
    interpolation path with zero conditional covariance, so it doubles as
    the exact fast path for linear-interpolant training.
    """

    sigma_a: float = 1.0
    sigma_b: float = 1.0

    def __post_init__(self):
        if self.sigma_a < 0:
            raise ConfigurationError(f"linear kernel needs sigma_a >= 0, got {self.sigma_a}")
        if self.sigma_b <= 0:
            raise ConfigurationError(f"linear kernel needs sigma_b > 0, got {self.sigma_b}")

    def blocks(self, t, t2) -> Blocks:
        t = np.asarray(t, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        a2 = self.sigma_a * self.sigma_a
        b2 = self.sigma_b * self.sigma_b
        c11 = a2 + b2 * (t - 1.0) * (t2 - 1.0)
        c12 = b2 * (t - 1.0) * np.ones_like(t2)
        c21 = b2 * (t2 - 1.0) * np.ones_like(t)
        c22 = np.broadcast_to(np.float64(b2), np.broadcast_shapes(t.shape, t2.shape)).copy()
        return c11, c12, c21, c22


@dataclass(frozen=True)
class DotProductIncreasing(Kernel):
    """c11(t, t2) = alpha * t * t2; variance grows toward t = 1."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"dot-product kernel needs alpha > 0, got {self.alpha}")

    def blocks(self, t, t2) -> Blocks:
        t = np.asarray(t, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        c11 = self.alpha * t * t2
        c12 = self.alpha * t * np.ones_like(t2)
        c21 = self.alpha * t2 * np.ones_like(t)
        c22 = np.broadcast_to(np.float64(self.alpha), np.broadcast_shapes(t.shape, t2.shape)).copy()
        return c11, c12, c21, c22


@dataclass(frozen=True)
class DotProductDecreasing(Kernel):
    """c11(t, t2) = alpha * (t - 1)(t2 - 1); variance grows toward t = 0."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"dot-product kernel needs alpha > 0, got {self.alpha}")

    def blocks(self, t, t2) -> Blocks:
        t = np.asarray(t, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        c11 = self.alpha * (t - 1.0) * (t2 - 1.0)
        c12 = self.alpha * (t - 1.0) * np.ones_like(t2)
        c21 = self.alpha * (t2 - 1.0) * np.ones_like(t)
        c22 = np.broadcast_to(np.float64(self.alpha), np.broadcast_shapes(t.shape, t2.shape)).copy()
        return c11, c12, c21, c22


@dataclass(frozen=True)
class Nugget(Kernel):
    """White noise: sigma_w^2 on c11 at exactly coincident times.

    Only valid as a Sum member; the white-noise process is nowhere
    differentiable, so all derivative blocks are zero.
    """

    sigma_w: float = 1e-3

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ConfigurationError(f"nugget needs sigma_w >= 0, got {self.sigma_w}")

    def blocks(self, t, t2) -> Blocks:
        t = np.asarray(t, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        c11 = np.where(t == t2, self.sigma_w * self.sigma_w, 0.0)
        zero = np.zeros(np.broadcast_shapes(t.shape, t2.shape))
        return c11, zero.copy(), zero.copy(), zero.copy()

    def has_nugget(self) -> bool:
        return True


@dataclass(frozen=True)
class Sum(Kernel):
    """Elementwise sum of member kernel blocks."""

    members: tuple[Kernel, ...]

    def __post_init__(self):
        if len(self.members) == 0:
            raise ConfigurationError("sum kernel needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    def blocks(self, t, t2) -> Blocks:
        parts = [m.blocks(t, t2) for m in self.members]
        return tuple(sum(p[i] for p in parts) for i in range(4))  # type: ignore[return-value]

    def has_nugget(self) -> bool:
        return any(m.has_nugget() for m in self.members)


def eval_blocks(kernel: Kernel, t, t2) -> Blocks:
    """Evaluate the four covariance blocks of ``kernel`` at (t, t2).

    A bare nugget is rejected: white noise is only meaningful as an additive
    term on top of a differentiable kernel.
    """
    if isinstance(kernel, Nugget):
        raise ConfigurationError("nugget kernel may only appear as a Sum member")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(t2))):
        raise ValueError("kernel times must be finite")
    out = kernel.blocks(t, t2)
    if np.isscalar(t) and np.isscalar(t2):
        return tuple(float(b) for b in out)  # type: ignore[return-value]
    return out


@dataclass(frozen=True)
class GramBundle:
    """Factorized covariance of the pinned observation times.

    Holds the M x M position-covariance over ``obs_times`` together with its
    lower Cholesky factor (computed at the smallest jitter in the schedule
    that succeeds).  The bundle is immutable and shared across batch rows
    and data dimensions: kernels carry the same hyper-parameters in every
    dimension, so one factorization serves them all.
    """

    kernel: Kernel
    obs_times: np.ndarray
    K_obs: np.ndarray
    chol: np.ndarray
    jitter: float

    @property
    def n_obs(self) -> int:
        return len(self.obs_times)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (K_obs + jitter I) x = b through the cached factorization."""
        return scipy.linalg.cho_solve((self.chol, True), b)

    def cross(self, t: float) -> np.ndarray:
        """2 x M cross block [c11(t, t_j); c21(t, t_j)] for a query time."""
        c11, _, c21, _ = self.kernel.blocks(t, self.obs_times)
        return np.stack([c11, c21])

    def point(self, t: float) -> np.ndarray:
        """2 x 2 joint (position, velocity) covariance at a single time."""
        c11, c12, c21, c22 = self.kernel.blocks(t, t)
        return np.array([[c11, c12], [c21, c22]], dtype=float)

    def cross_many(self, ts: np.ndarray) -> np.ndarray:
        """(n, 2, M) cross blocks for a vector of query times."""
        ts = np.asarray(ts, dtype=float)
        c11, _, c21, _ = self.kernel.blocks(ts[:, None], self.obs_times[None, :])
        return np.stack([c11, c21], axis=1)

    def point_many(self, ts: np.ndarray) -> np.ndarray:
        """(n, 2, 2) joint covariance blocks for a vector of query times."""
        ts = np.asarray(ts, dtype=float)
        c11, c12, c21, c22 = self.kernel.blocks(ts, ts)
        out = np.empty((len(ts), 2, 2))
        out[:, 0, 0] = c11
        out[:, 0, 1] = c12
        out[:, 1, 0] = c21
        out[:, 1, 1] = c22
        return out


def build_gram(
    kernel: Kernel,
    obs_times,
    jitter_schedule=DEFAULT_JITTER_SCHEDULE,
) -> GramBundle:
    """Assemble and factorize the observation covariance matrix.

    Tries each jitter in ``jitter_schedule`` in order and keeps the first
    that makes the Cholesky factorization succeed.  Observation times must
    be strictly increasing in [0, 1] with the first at 0 and the last at 1.
    """
    if isinstance(kernel, Nugget):
        raise ConfigurationError("nugget kernel may only appear as a Sum member")
    obs_times = np.asarray(obs_times, dtype=float)
    if obs_times.ndim != 1 or len(obs_times) < 2:
        raise ConfigurationError("need at least two observation times")
    if np.any(np.diff(obs_times) <= 0):
        raise ConfigurationError(f"observation times must be strictly increasing: {obs_times}")
    if obs_times[0] != 0.0 or obs_times[-1] != 1.0:
        raise ConfigurationError(
            f"observation times must start at 0 and end at 1, got {obs_times}"
        )

    c11, _, _, _ = kernel.blocks(obs_times[:, None], obs_times[None, :])
    K = 0.5 * (c11 + c11.T)

    for jitter in jitter_schedule:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(len(obs_times)))
        except np.linalg.LinAlgError:
            continue
        return GramBundle(kernel=kernel, obs_times=obs_times, K_obs=K, chol=L, jitter=jitter)

    raise NumericalDegeneracyError(
        f"covariance over times {obs_times.tolist()} for kernel {kernel!r} is not "
        f"positive definite even at jitter {max(jitter_schedule)}"
    )


_KERNEL_TAGS: dict[str, Callable[..., Kernel]] = {
    "se": lambda cfg: SquaredExponential(alpha=cfg.get("alpha", 1.0), l=cfg.get("l", 0.3)),
    "linear": lambda cfg: Linear(
        sigma_a=cfg.get("sigma_a", 1.0), sigma_b=cfg.get("sigma_b", 1.0)
    ),
    "dot_increasing": lambda cfg: DotProductIncreasing(alpha=cfg.get("alpha", 1.0)),
    "dot_decreasing": lambda cfg: DotProductDecreasing(alpha=cfg.get("alpha", 1.0)),
    "nugget": lambda cfg: Nugget(sigma_w=cfg.get("sigma_w", 1e-3)),
}


def kernel_from_config(cfg: dict) -> Kernel:
    """Build a kernel from its tagged config form.

    Accepts e.g. ``{type = "se", alpha = 1.0, l = 0.3}``; ``type = "sum"``
    nests members under a ``members`` list.
    """
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigurationError(f"kernel config must be a table with a 'type' key: {cfg!r}")
    tag = cfg["type"]
    if tag == "sum":
        members = cfg.get("members")
        if not members:
            raise ConfigurationError("sum kernel config needs a non-empty 'members' list")
        return Sum(tuple(kernel_from_config(m) for m in members))
    if tag not in _KERNEL_TAGS:
        raise ConfigurationError(
            f"unknown kernel type {tag!r}; expected one of "
            f"{sorted(_KERNEL_TAGS) + ['sum']}"
        )
    known = {
        "se": {"type", "alpha", "l"},
        "linear": {"type", "sigma_a", "sigma_b"},
        "dot_increasing": {"type", "alpha"},
        "dot_decreasing": {"type", "alpha"},
        "nugget": {"type", "sigma_w"},
    }[tag]
    extra = set(cfg) - known
    if extra:
        raise ConfigurationError(f"unknown keys {sorted(extra)} in kernel config {cfg!r}")
    return _KERNEL_TAGS[tag](cfg)
