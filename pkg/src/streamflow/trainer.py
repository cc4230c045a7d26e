"""Training loops for linear and GP stream models.

Four algorithm variants: independent coupling or exact minibatch-OT
coupling, each with either the straight interpolation path or joint
Gaussian draws from a conditioned stream model.  Each iteration draws an
observation tuple per batch row, a time per row, a (position, velocity)
pair from the stream model, and takes one Adam step on the squared
velocity-regression error.

All randomness derives from one seed through four purpose-split generator
streams (init / batch / time / stream draws), so runs are reproducible and
the straight-line fast path consumes exactly the same batch and time
streams as the GP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import (
    EmpiricalSource,
    grouped_tuple_sampler,
    independent_coupling,
    ot_coupling,
)
from .errors import ConfigurationError, TrainingDivergenceError
from .gp_stream import ZeroMean, _condition_arrays, _sample_arrays
from .kernels import (
    DotProductDecreasing,
    DotProductIncreasing,
    Kernel,
    Linear,
    Nugget,
    SquaredExponential,
    Sum,
    build_gram,
)
from .vector_field import (
    AdamState,
    Architecture,
    VectorFieldModel,
    adam_step,
    init_params,
    loss_and_grad,
)

ALGORITHMS = ("i_cfm", "gp_i_cfm", "ot_cfm", "gp_ot_cfm")
SCHEMES = ("none", "constant", "increasing", "decreasing")


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "gp_i_cfm"
    scheme: str = "none"
    scheme_value: float = 1.0  # nugget sd for constant, dot-product alpha otherwise
    kernel_type: str = "se"
    kernel_alpha: float = 1.0
    kernel_l: float = 0.3
    sigma_linear: float = 0.0  # interpolant noise sd for i_cfm / ot_cfm
    covariate_mode: str = "off"
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    batch_size: int = 128
    iterations: int = 5000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    t_per_batch: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown variance scheme {self.scheme!r}")
        if self.kernel_type not in ("se", "linear"):
            raise ConfigurationError(f"unknown kernel type {self.kernel_type!r}")
        if self.covariate_mode not in ("off", "x0"):
            raise ConfigurationError(f"unknown covariate mode {self.covariate_mode!r}")
        if self.scheme != "none" and self.kernel_type != "se":
            raise ConfigurationError("variance schemes apply to the se kernel only")
        if self.batch_size < 1 or self.iterations < 0:
            raise ConfigurationError("batch_size must be >= 1 and iterations >= 0")
        if self.sigma_linear < 0:
            raise ConfigurationError("sigma_linear must be >= 0")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @property
    def uses_gp_stream(self) -> bool:
        return self.algorithm in ("gp_i_cfm", "gp_ot_cfm")

    @property
    def uses_ot(self) -> bool:
        return self.algorithm in ("ot_cfm", "gp_ot_cfm")


def make_scheme_kernel(alpha: float, l: float, scheme: str, scheme_value: float) -> Kernel:
    """SE kernel plus the configured variance-scheme term."""
    base = SquaredExponential(alpha=alpha, l=l)
    if scheme == "none":
        return base
    if scheme == "constant":
        return Sum((base, Nugget(sigma_w=scheme_value)))
    if scheme == "increasing":
        return Sum((base, DotProductIncreasing(alpha=scheme_value)))
    if scheme == "decreasing":
        return Sum((base, DotProductDecreasing(alpha=scheme_value)))
    raise ConfigurationError(f"unknown variance scheme {scheme!r}")


def training_kernel(config: TrainConfig) -> Kernel:
    """The stream kernel a config implies (linear-interpolant variants
    included, so the fast path can be cross-checked against it)."""
    if config.uses_gp_stream and config.kernel_type == "se":
        return make_scheme_kernel(config.kernel_alpha, config.kernel_l,
                                  config.scheme, config.scheme_value)
    lin = Linear(sigma_a=1.0, sigma_b=1.0)
    if not config.uses_gp_stream and config.sigma_linear > 0:
        return Sum((lin, Nugget(sigma_w=config.sigma_linear)))
    return lin


def draw_times(rng: np.random.Generator, n: int, per_batch: bool = False) -> np.ndarray:
    """Uniform training times; one per row, or one shared draw per batch."""
    if per_batch:
        return np.full(n, rng.random())
    return rng.random(n)


def _coerce_source(source):
    if isinstance(source, np.ndarray):
        return EmpiricalSource(source)
    return source


def linear_path(ts: np.ndarray, x0: np.ndarray, x1: np.ndarray):
    """Closed-form straight-line path: position and constant velocity."""
    s = (1.0 - ts)[:, None] * x0 + ts[:, None] * x1
    return s, x1 - x0


def train(config: TrainConfig, data, seed: int | None = None):
    """Two-endpoint training; ``data`` is (source, target_rows).

    The source may be a GaussianSource, an EmpiricalSource, or a raw (n, d)
    matrix.  Returns (model, loss_trace) with the loss recorded every 100
    iterations.
    """
    source, target_rows = data
    source = _coerce_source(source)
    target_rows = np.asarray(target_rows, dtype=float)
    d = target_rows.shape[1]
    if source.d != d:
        raise ConfigurationError(f"source dimension {source.d} != target dimension {d}")

    def draw_batch(rng):
        return independent_coupling(source, target_rows, config.batch_size, rng)

    return _run_loop(config, draw_batch, times=(0.0, 1.0), d=d, seed=seed)


def train_multimarginal(config: TrainConfig, slices, group_ids, times, seed: int | None = None):
    """Training across M pinned time points with subject-aligned tuples.

    ``slices[j]`` is an (n, d) matrix (or a source object for a noise
    slice); ``times`` gives the pinned time of each slice.  With M = 2 data
    slices this reduces to plain two-endpoint training.
    """
    if len(slices) != len(times) or len(slices) < 2:
        raise ConfigurationError("need one slice per pinned time, at least two")
    if config.uses_ot and len(slices) > 2:
        raise ConfigurationError("minibatch OT coupling is defined for two endpoints only")
    data = [s for s in slices if isinstance(s, np.ndarray)]
    if not data:
        raise ConfigurationError("need at least one data slice")
    d = data[0].shape[1]

    def draw_batch(rng):
        return grouped_tuple_sampler(slices, group_ids, config.batch_size, rng)

    return _run_loop(config, draw_batch, times=tuple(times), d=d, seed=seed)


def _run_loop(config: TrainConfig, draw_batch, times, d: int, seed):
    seed = config.seed if seed is None else seed
    streams = np.random.SeedSequence(seed).spawn(4)
    rng_init, rng_batch, rng_t, rng_gp = (np.random.default_rng(s) for s in streams)

    d_c = d if config.covariate_mode == "x0" else 0
    arch = Architecture(d=d, hidden=config.hidden, activation=config.activation, d_c=d_c)
    params = init_params(arch, rng_init)
    adam = AdamState.init(arch.param_count(), lr=config.lr, beta1=config.beta1,
                          beta2=config.beta2, eps=config.eps)

    fast_linear = not config.uses_gp_stream and config.sigma_linear == 0.0
    bundle = None
    if not fast_linear:
        bundle = build_gram(training_kernel(config), np.asarray(times, dtype=float))
    mean_fn = ZeroMean()

    trace: list[tuple[int, float]] = []
    for it in range(config.iterations):
        batch = draw_batch(rng_batch)
        slices = list(batch.slices)
        if config.uses_ot:
            perm = ot_coupling(slices[0], slices[-1])
            slices[-1] = slices[-1][perm]
        ts = draw_times(rng_t, config.batch_size, config.t_per_batch)

        if fast_linear:
            s, sdot = linear_path(ts, slices[0], slices[-1])
        else:
            values = np.stack(slices, axis=1)  # (n, M, d)
            means, covs = _condition_arrays(bundle, mean_fn, values, ts)
            s, sdot = _sample_arrays(means, covs, rng_gp)

        cs = slices[0] if config.covariate_mode == "x0" else None
        try:
            loss, grad = loss_and_grad(arch, params, ts, s, sdot, cs)
        except TrainingDivergenceError:
            raise TrainingDivergenceError(
                f"non-finite loss at iteration {it}", step=it
            ) from None
        adam, params = adam_step(adam, params, grad)
        if it % 100 == 0:
            trace.append((it, loss))

    return VectorFieldModel(arch=arch, params=params), trace


LOSS_TRACE_HEADER = "iter,loss"


def write_loss_trace_csv(path, trace) -> None:
    with open(path, "w") as fh:
        fh.write(LOSS_TRACE_HEADER + "\n")
        for it, loss in trace:
            fh.write(f"{it},{loss:.17g}\n")
