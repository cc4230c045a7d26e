"""The velocity regressor: a small MLP with hand-written reverse mode.

Parameters live in one flat float64 vector with a per-layer offset table,
which keeps the optimizer trivial and checkpoint serialization exact.  The
network input is the concatenation [t, x, c] in that fixed order (c only
when covariate-conditioned).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, TrainingDivergenceError

_SELU_ALPHA = 1.6732632423543772
_SELU_SCALE = 1.0507009873554805


@dataclass(frozen=True)
class Architecture:
    """Shape descriptor for the velocity network."""

    d: int
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    d_c: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.d < 1:
            raise ConfigurationError(f"output dimension must be >= 1, got {self.d}")
        if self.d_c < 0:
            raise ConfigurationError(f"covariate dimension must be >= 0, got {self.d_c}")
        if any(w < 1 for w in self.hidden):
            raise ConfigurationError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation not in ("tanh", "selu"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return 1 + self.d + self.d_c

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.d)

    def layer_shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        w = self.widths
        return [((w[i + 1], w[i]), (w[i + 1],)) for i in range(len(w) - 1)]

    def param_count(self) -> int:
        return sum(wo * wi + wo for (wo, wi), _ in self.layer_shapes())


def _unpack(arch: Architecture, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (no copies) of the per-layer weight matrices and bias vectors."""
    if params.shape != (arch.param_count(),):
        raise ValueError(
            f"parameter vector has length {params.shape}, architecture needs "
            f"({arch.param_count()},)"
        )
    layers = []
    off = 0
    for (wo, wi), _ in arch.layer_shapes():
        W = params[off : off + wo * wi].reshape(wo, wi)
        off += wo * wi
        b = params[off : off + wo]
        off += wo
        layers.append((W, b))
    return layers


def init_params(arch: Architecture, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    params = np.zeros(arch.param_count())
    for W, b in _unpack(arch, params):
        wo, wi = W.shape
        limit = np.sqrt(6.0 / (wi + wo))
        W[...] = rng.uniform(-limit, limit, size=(wo, wi))
    return params


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return _SELU_SCALE * np.where(z > 0, z, _SELU_ALPHA * np.expm1(z))


def _activation_grad(a: np.ndarray, activation: str) -> np.ndarray:
    # both activations admit derivatives in terms of their own output
    if activation == "tanh":
        return 1.0 - a * a
    return np.where(a > 0, _SELU_SCALE, a + _SELU_SCALE * _SELU_ALPHA)


def _stack_inputs(arch, ts, xs, cs):
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if xs.shape[1] != arch.d:
        raise ValueError(f"x has dimension {xs.shape[1]}, architecture expects {arch.d}")
    cols = [ts[:, None], xs]
    if arch.d_c > 0:
        if cs is None:
            raise ValueError("architecture is covariate-conditioned but no covariate given")
        cs = np.asarray(cs, dtype=float)
        if cs.shape[1] != arch.d_c:
            raise ValueError(f"covariate has dimension {cs.shape[1]}, expects {arch.d_c}")
        cols.append(cs)
    elif cs is not None:
        raise ValueError("covariate given but architecture takes none")
    return np.concatenate(cols, axis=1)


def forward_batch(
    arch: Architecture,
    params: np.ndarray,
    ts: np.ndarray,
    xs: np.ndarray,
    cs: np.ndarray | None = None,
) -> np.ndarray:
    """Evaluate the field on a batch: ts (n,), xs (n, d) -> (n, d)."""
    h = _stack_inputs(arch, ts, xs, cs)
    layers = _unpack(arch, params)
    for W, b in layers[:-1]:
        h = _activate(h @ W.T + b, arch.activation)
    W, b = layers[-1]
    return h @ W.T + b


def forward(arch, params, t: float, x: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
    """Single-point evaluation of v(t, x[, c])."""
    x = np.asarray(x, dtype=float)
    c2 = None if c is None else np.asarray(c, dtype=float)[None, :]
    return forward_batch(arch, params, np.array([t]), x[None, :], c2)[0]


def loss_and_grad(
    arch: Architecture,
    params: np.ndarray,
    ts: np.ndarray,
    xs: np.ndarray,
    targets: np.ndarray,
    cs: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean squared-Euclidean error against target velocities, with exact gradient.

    loss = mean_i || v(t_i, x_i[, c_i]) - target_i ||^2; the gradient is
    accumulated by reverse-mode propagation through the stored activations.
    """
    if len(ts) == 0:
        raise ValueError("empty batch")
    h = _stack_inputs(arch, ts, xs, cs)
    layers = _unpack(arch, params)
    acts = [h]
    for W, b in layers[:-1]:
        h = _activate(h @ W.T + b, arch.activation)
        acts.append(h)
    W, b = layers[-1]
    y = h @ W.T + b

    n = len(ts)
    resid = y - np.asarray(targets, dtype=float)
    loss = float(np.sum(resid * resid) / n)
    if not np.isfinite(loss):
        raise TrainingDivergenceError("loss is not finite")

    grad = np.zeros_like(params)
    gly = 2.0 * resid / n
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        gW, gb = _grad_views(arch, grad, k)
        gW += gly.T @ acts[k]
        gb += gly.sum(axis=0)
        if k > 0:
            gh = gly @ W
            gly = gh * _activation_grad(acts[k], arch.activation)
    return loss, grad


def _grad_views(arch, grad, layer):
    off = 0
    for i, ((wo, wi), _) in enumerate(arch.layer_shapes()):
        if i == layer:
            return grad[off : off + wo * wi].reshape(wo, wi), grad[off + wo * wi : off + wo * wi + wo]
        off += wo * wi + wo
    raise IndexError(layer)


@dataclass
class AdamState:
    """Adam optimizer state for a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), lr=lr,
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
    state: AdamState, params: np.ndarray, grad: np.ndarray
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns fresh state and parameters."""
    if state.m.shape != params.shape or grad.shape != params.shape:
        raise ValueError("optimizer state, parameters and gradient must share a shape")
    step = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**step)
    v_hat = v / (1 - state.beta2**step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, step=step, lr=state.lr, beta1=state.beta1,
                          beta2=state.beta2, eps=state.eps)
    return new_state, new_params


@dataclass
class VectorFieldModel:
    """Trained field: architecture descriptor plus flat parameters."""

    arch: Architecture
    params: np.ndarray

    def __call__(self, ts, xs, cs=None) -> np.ndarray:
        return forward_batch(self.arch, self.params, ts, xs, cs)


CHECKPOINT_FORMAT = "sfck-v1"
CHECKPOINT_EXTENSION = ".sfck"


def save_checkpoint(path, model: VectorFieldModel) -> None:
    """Write the model as structured text.

    Floats are printed with 17 significant digits, which round-trips IEEE
    doubles exactly.
    """
    arch = model.arch
    header = {
        "format": CHECKPOINT_FORMAT,
        "architecture": {
            "d": arch.d,
            "hidden": list(arch.hidden),
            "activation": arch.activation,
            "d_c": arch.d_c,
        },
    }
    body = ",".join(format(v, ".17g") for v in model.params)
    text = json.dumps(header, indent=1)
    text = text[:-2] + ',\n "params": [' + body + "]\n}\n"
    with open(path, "w") as fh:
        fh.write(text)


def load_checkpoint(path) -> VectorFieldModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    a = doc["architecture"]
    arch = Architecture(d=a["d"], hidden=tuple(a["hidden"]), activation=a["activation"],
                        d_c=a["d_c"])
    params = np.asarray(doc["params"], dtype=float)
    if params.shape != (arch.param_count(),):
        raise ConfigurationError(
            f"{path}: {len(params)} parameters, architecture needs {arch.param_count()}"
        )
    return VectorFieldModel(arch=arch, params=params)
