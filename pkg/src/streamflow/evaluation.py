"""Metrics: exact 2-Wasserstein distance, a Monte-Carlo estimate of the
marginal velocity field, and multi-seed summaries.

The W2 distance between equal-size empirical sets is computed exactly via
the same assignment solver used for minibatch coupling; callers subsample
explicitly if sizes differ, so the metric never silently approximates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


def w2(a: np.ndarray, b: np.ndarray) -> float:
    """Exact 2-Wasserstein distance between equal-size empirical samples.

    W2 = sqrt((1/n) min_sigma sum_i ||a_i - b_{sigma(i)}||^2).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float).T).T
    b = np.atleast_2d(np.asarray(b, dtype=float).T).T
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}; subsample explicitly")
    cost = cdist(a, b, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


@dataclass
class FieldEstimate:
    """Estimated marginal velocity on a grid of states at one time."""

    t: float
    grid: np.ndarray  # (g, d)
    u_hat: np.ndarray  # (g, d); NaN where undefined
    weight_sums: np.ndarray  # (g,)
    defined: np.ndarray  # (g,) bool


def oracle_field(
    draw_fn,
    t: float,
    grid: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
    bandwidth: float | np.ndarray | None = None,
) -> FieldEstimate:
    """Monte-Carlo estimate of E(velocity | position = x) at time ``t``.

    ``draw_fn(n, t, rng)`` must return n joint draws (positions (n, d),
    velocities (n, d)) from the stream model.  The conditional expectation
    is estimated by a Nadaraya-Watson smoother with a Gaussian product
    kernel; the default bandwidth is Silverman's per-dimension rule
    1.06 * sd * n^(-1/5).  Grid points whose total kernel weight falls
    below 1e-8 are flagged undefined.
    """
    if n_draws < 1_000:
        raise ValueError(f"need at least 1000 draws, got {n_draws}")
    grid = np.atleast_2d(np.asarray(grid, dtype=float).T).T
    s, sdot = draw_fn(n_draws, t, rng)
    s = np.asarray(s, dtype=float)
    sdot = np.asarray(sdot, dtype=float)

    if bandwidth is None:
        h = 1.06 * s.std(axis=0, ddof=1) * n_draws ** (-1 / 5)
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (s.shape[1],))
    h = np.maximum(h, 1e-12)

    # product Gaussian kernel weights; bounded by 1, underflow to 0 is the
    # desired behavior for grid points far from every draw
    z = (grid[:, None, :] - s[None, :, :]) / h[None, None, :]
    w = np.exp(-0.5 * np.sum(z * z, axis=2))
    wsum = w.sum(axis=1)
    defined = wsum >= 1e-8
    u = np.full_like(grid, np.nan)
    u[defined] = (w[defined] @ sdot) / wsum[defined, None]
    return FieldEstimate(t=float(t), grid=grid, u_hat=u, weight_sums=wsum, defined=defined)


@dataclass
class RunMetrics:
    """One benchmark run's record."""

    seed: int
    algorithm: str
    scheme: str
    w2: float
    train_seconds: float = 0.0
    generate_seconds: float = 0.0

    def __post_init__(self):
        if self.w2 < 0:
            raise ValueError(f"w2 must be non-negative, got {self.w2}")


def summarize(runs: list[RunMetrics], group_keys: tuple[str, ...] = ("algorithm", "scheme")):
    """Group runs and report (group, mean, standard error, count) rows.

    SE is the sample standard deviation over seeds divided by sqrt(count);
    groups need at least two runs for that to be defined.
    """
    groups: dict[tuple, list[float]] = {}
    for r in runs:
        key = tuple(getattr(r, k) for k in group_keys)
        groups.setdefault(key, []).append(r.w2)
    if not groups:
        raise ValueError("no runs to summarize")
    rows = []
    for key in sorted(groups):
        vals = np.asarray(groups[key])
        if len(vals) < 2:
            raise ValueError(f"group {key} has {len(vals)} run(s); need at least 2")
        rows.append((key, float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))),
                     len(vals)))
    return rows


METRICS_CSV_HEADER = "seed,algorithm,scheme,w2,train_s,gen_s"
SUMMARY_CSV_HEADER = "group,mean,se,n"


def write_metrics_csv(path, runs: list[RunMetrics]) -> None:
    with open(path, "w") as fh:
        fh.write(METRICS_CSV_HEADER + "\n")
        for r in runs:
            fh.write(
                f"{r.seed},{r.algorithm},{r.scheme},{r.w2:.17g},"
                f"{r.train_seconds:.6g},{r.generate_seconds:.6g}\n"
            )


def read_metrics_csv(path) -> list[RunMetrics]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != METRICS_CSV_HEADER:
            raise ValueError(f"{path}: expected header {METRICS_CSV_HEADER!r}")
        for line in fh:
            seed, alg, scheme, v, ts, gs = line.strip().split(",")
            out.append(RunMetrics(int(seed), alg, scheme, float(v), float(ts), float(gs)))
    return out


def write_summary_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(SUMMARY_CSV_HEADER + "\n")
        for key, mean, se, n in rows:
            fh.write(f"{'/'.join(str(k) for k in key)},{mean:.17g},{se:.17g},{n}\n")
