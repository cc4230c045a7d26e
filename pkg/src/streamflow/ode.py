"""Sample generation by integrating dx/dt = v(t, x) over sub-intervals of [0, 1].

Fixed-step Euler and classic RK4 integrate whole batches; the adaptive
solver is the Dormand-Prince 5(4) embedded pair with PI step-size control
and the standard fourth-order dense-output polynomial for snapshotting at
intermediate stop times.  States may be single vectors or (n, d) batches;
the field is evaluated row-wise either way.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StiffnessError

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# fifth-order weights minus the embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense-output coefficients (fourth-order continuous extension)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

_SAFETY = 0.9
_FACTOR_MIN = 0.2
_FACTOR_MAX = 5.0
_PI_BETA = 0.04


@dataclass(frozen=True)
class IntegratorSpec:
    """Solver selection: fixed-step euler/rk4 or adaptive dopri5."""

    method: str = "rk4"
    n_steps: int = 100
    rtol: float = 1e-5
    atol: float = 1e-5
    max_steps: int = 100_000
    initial_step: float | None = None

    def __post_init__(self):
        if self.method not in ("euler", "rk4", "dopri5"):
            raise ConfigurationError(f"unknown integrator {self.method!r}")
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ConfigurationError("initial_step must be positive")


def integrate(field, x0, t_span, spec: IntegratorSpec, c=None):
    """Integrate from t_a to t_b; returns the trajectory [(t, state), ...]."""
    t_a, t_b = t_span
    if not (0.0 <= t_a < t_b <= 1.0):
        raise ValueError(f"need 0 <= t_a < t_b <= 1, got span {t_span}")
    f = field if c is None else (lambda t, x: field(t, x, c))
    x0 = np.array(x0, dtype=float)
    if spec.method == "dopri5":
        traj, _ = _dopri5(f, x0, t_a, t_b, spec, stops=())
        return traj
    return _fixed_step(f, x0, t_a, t_b, spec.n_steps, spec.method)


def generate(model, source_batch, spec: IntegratorSpec, stops, c=None):
    """Push a source batch through the learned flow, snapshotting at stops.

    ``model`` is callable as model(ts, xs[, cs]); stops must be sorted and
    lie in (0, 1].  Fixed-step methods land on each stop exactly; dopri5
    interpolates with its dense output.  Returns one batch per stop.
    """
    stops = [float(s) for s in stops]
    if not stops or sorted(stops) != stops or stops[0] <= 0.0 or stops[-1] > 1.0:
        raise ValueError(f"stops must be sorted within (0, 1], got {stops}")
    xs = np.array(source_batch, dtype=float)
    cs = None if c is None else np.asarray(c, dtype=float)

    def f(t, x):
        ts = np.full(len(x), t)
        return model(ts, x, cs) if cs is not None else model(ts, x)

    if spec.method == "dopri5":
        _, snaps = _dopri5(f, xs, 0.0, stops[-1], spec, stops=tuple(stops))
        return [snaps[s] for s in stops]

    out = []
    t_prev = 0.0
    state = xs
    total = stops[-1]
    for s in stops:
        seg_steps = max(1, round(spec.n_steps * (s - t_prev) / total))
        traj = _fixed_step(f, state, t_prev, s, seg_steps, spec.method)
        state = traj[-1][1]
        out.append(state)
        t_prev = s
    return out


def _fixed_step(f, x0, t_a, t_b, n_steps, method):
    h = (t_b - t_a) / n_steps
    t, y = t_a, x0.copy()
    traj = [(t, y.copy())]
    for i in range(n_steps):
        t = t_a + i * h
        if method == "euler":
            y = y + h * f(t, y)
        else:
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        traj.append((t_a + (i + 1) * h, y.copy()))
    return traj


def _error_norm(err_vec, y0, y1, spec):
    scale = spec.atol + spec.rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err_vec / scale) ** 2)))


def _initial_step(f, t0, y0, k1, t_end, spec):
    scale = spec.atol + spec.rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((k1 / scale) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    k2 = f(t0 + h0, y0 + h0 * k1)
    d2 = np.sqrt(np.mean(((k2 - k1) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_end - t0)


def _dopri5(f, x0, t_a, t_b, spec, stops):
    t, y = t_a, x0.copy()
    k = [None] * 7
    k[0] = f(t, y)
    h = spec.initial_step or _initial_step(f, t, y, k[0], t_b, spec)
    traj = [(t, y.copy())]
    snaps = {}
    pending = [s for s in stops if s > t_a]
    err_old = 1e-4
    n_steps = 0
    while t < t_b - 1e-14:
        if n_steps >= spec.max_steps:
            raise StiffnessError(
                f"dopri5 exceeded {spec.max_steps} steps; last accepted t = {t:.6g}",
                last_t=t,
            )
        n_steps += 1
        h = min(h, t_b - t)
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i] = f(t + _C[i] * h, yi)
        y5 = y + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        err = _error_norm(err_vec, y, y5, spec)

        if err <= 1.0:
            while pending and pending[0] <= t + h + 1e-14:
                s = pending.pop(0)
                theta = np.clip((s - t) / h, 0.0, 1.0)
                snaps[s] = _dense_eval(y, y5, k, h, theta)
            t = t + h
            y = y5
            k[0] = k[6]  # first-same-as-last
            traj.append((t, y.copy()))
            err_c = max(err, 1e-10)
            factor = _SAFETY * err_c ** -(0.2 - 0.75 * _PI_BETA) * err_old**_PI_BETA
            h = h * min(_FACTOR_MAX, max(_FACTOR_MIN, factor))
            err_old = max(err, 1e-4)
        else:
            factor = _SAFETY * err ** -0.2
            h = h * min(1.0, max(_FACTOR_MIN, factor))
    return traj, snaps


def _dense_eval(y0, y1, k, h, theta):
    """Fourth-order continuous extension inside one accepted step."""
    ydiff = y1 - y0
    bspl = h * k[0] - ydiff
    r1, r2, r3 = y0, ydiff, bspl
    r4 = ydiff - h * k[6] - bspl
    r5 = h * sum(d * k[j] for j, d in enumerate(_D) if d != 0.0)
    return r1 + theta * (r2 + (1 - theta) * (r3 + theta * (r4 + (1 - theta) * r5)))


SAMPLES_CSV_HEADER = "t,row,dim,value"
SAMPLES_MAGIC = b"SFLW1"


def write_samples_csv(path, stops, batches) -> None:
    """Long-format CSV of generated batches: one line per (stop, row, dim)."""
    with open(path, "w") as fh:
        fh.write(SAMPLES_CSV_HEADER + "\n")
        for t, batch in zip(stops, batches):
            for r, row in enumerate(batch):
                for dim, v in enumerate(row):
                    fh.write(f"{t:.17g},{r},{dim},{v:.17g}\n")


def read_samples_csv(path) -> tuple[list[float], list[np.ndarray]]:
    data: dict[float, dict] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SAMPLES_CSV_HEADER:
            raise ConfigurationError(f"{path}: expected header {SAMPLES_CSV_HEADER!r}")
        for line in fh:
            t_s, r_s, d_s, v_s = line.strip().split(",")
            data.setdefault(float(t_s), {})[(int(r_s), int(d_s))] = float(v_s)
    stops = sorted(data)
    batches = []
    for t in stops:
        cells = data[t]
        n = max(r for r, _ in cells) + 1
        d = max(dd for _, dd in cells) + 1
        batch = np.empty((n, d))
        for (r, dd), v in cells.items():
            batch[r, dd] = v
        batches.append(batch)
    return stops, batches


def write_samples_binary(path, stops, batches) -> None:
    """Column-major binary layout.

    Header: magic "SFLW1", version byte 1, then little-endian uint32
    counts (n_stops, n_rows, n_dims), the stop times as float64, and per
    stop the values one column (dimension) at a time as float64.
    """
    batches = [np.asarray(b, dtype=float) for b in batches]
    n_rows, n_dims = batches[0].shape
    with open(path, "wb") as fh:
        fh.write(SAMPLES_MAGIC)
        fh.write(struct.pack("<BIII", 1, len(stops), n_rows, n_dims))
        fh.write(np.asarray(stops, dtype="<f8").tobytes())
        for b in batches:
            fh.write(np.asfortranarray(b.astype("<f8")).tobytes(order="F"))


def read_samples_binary(path) -> tuple[list[float], list[np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != SAMPLES_MAGIC:
            raise ConfigurationError(f"{path}: bad magic {magic!r}")
        version, n_stops, n_rows, n_dims = struct.unpack("<BIII", fh.read(13))
        if version != 1:
            raise ConfigurationError(f"{path}: unsupported version {version}")
        stops = np.frombuffer(fh.read(8 * n_stops), dtype="<f8").tolist()
        batches = []
        for _ in range(n_stops):
            raw = np.frombuffer(fh.read(8 * n_rows * n_dims), dtype="<f8")
            batches.append(raw.reshape((n_rows, n_dims), order="F").copy())
    return stops, batches
