"""Observation-tuple sampling: endpoint couplings and grouped tuples.

Training needs joint draws of the values a stream is pinned to.  For two
endpoints that is a coupling of source and target; independent pairing and
exact minibatch optimal-transport pairing are provided.  For M > 2 pinned
times, tuples are drawn subject-by-subject so that correlated observations
stay together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

MAX_OT_BATCH = 4096


class GaussianSource:
    """Standard normal source distribution in d dimensions."""

    def __init__(self, d: int):
        self.d = d

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.d))


class EmpiricalSource:
    """Source given by finite rows; draws are uniform with replacement."""

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or len(rows) == 0:
            raise ValueError("empirical source needs a non-empty (n, d) matrix")
        self.rows = rows
        self.d = rows.shape[1]

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.rows[rng.integers(len(self.rows), size=n)]


@dataclass
class Batch:
    """Aligned observation rows for one training step.

    ``slices[j]`` holds every row's value at pinned time j; for the
    two-endpoint case these are (source, target).  Rows are aligned: row i
    of every member belongs to the same stream/subject.
    """

    slices: list[np.ndarray]
    covariates: np.ndarray | None = None

    @property
    def source(self) -> np.ndarray:
        return self.slices[0]

    @property
    def target(self) -> np.ndarray:
        return self.slices[-1]

    @property
    def n(self) -> int:
        return len(self.slices[0])

    def values(self) -> np.ndarray:
        """(n, M, d) stacked pinned values."""
        return np.stack(self.slices, axis=1)


def independent_coupling(
    source_sampler, target_rows: np.ndarray, batch_size: int, rng: np.random.Generator
) -> Batch:
    """Pair fresh source draws with uniformly drawn target rows by index.

    The target indices are drawn before the source values; grouped sampling
    consumes the generator in the same order, which makes the two samplers
    interchangeable on degenerate grouping structures.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    target_rows = np.asarray(target_rows, dtype=float)
    if target_rows.ndim != 2 or len(target_rows) == 0:
        raise ValueError("target set must be a non-empty (n, d) matrix")
    idx = rng.integers(len(target_rows), size=batch_size)
    source = source_sampler.draw(batch_size, rng)
    return Batch(slices=[source, target_rows[idx]])


def ot_coupling(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Exact squared-Euclidean assignment of target rows to source rows.

    Returns the permutation sigma minimizing sum_i ||source_i -
    target_{sigma(i)}||^2, solved as a dense linear assignment problem
    (shortest augmenting path, O(n^3)).  This is the minibatch
    approximation: each training batch is matched in isolation, which for
    small batches only approximates the population optimal transport plan.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape:
        raise ValueError(f"size mismatch: source {source.shape} vs target {target.shape}")
    if len(source) > MAX_OT_BATCH:
        raise ValueError(f"assignment batch limited to {MAX_OT_BATCH} rows, got {len(source)}")
    cost = cdist(source, target, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(source), dtype=np.intp)
    perm[rows] = cols
    return perm


def grouped_tuple_sampler(
    slices: list, group_ids: list, batch_size: int, rng: np.random.Generator
) -> Batch:
    """Draw batch rows holding one subject's values at all pinned times.

    ``slices[j]`` is either an (n_j, d) matrix with ``group_ids[j]`` naming
    the subject of each row, or a source object (e.g. GaussianSource) when
    that pinned time is a noise slice; noise slices are filled with fresh
    draws.  Subjects are drawn uniformly with replacement; within a subject
    and slice, one of its records is picked uniformly.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    data_slices = [j for j, s in enumerate(slices) if isinstance(s, np.ndarray)]
    if not data_slices:
        raise ValueError("need at least one data slice")

    subject_rows: list[dict] = []
    subjects_ref = None
    for j in data_slices:
        gid = np.asarray(group_ids[j])
        if len(gid) != len(slices[j]):
            raise ValueError(f"slice {j}: {len(slices[j])} rows but {len(gid)} group ids")
        by_subject: dict = {}
        for row, g in enumerate(gid):
            by_subject.setdefault(g, []).append(row)
        subject_rows.append(by_subject)
        keys = sorted(by_subject)
        if subjects_ref is None:
            subjects_ref = keys
        elif keys != subjects_ref:
            raise ValueError("slices do not share the same set of subjects")
    assert subjects_ref is not None

    picked = rng.integers(len(subjects_ref), size=batch_size)
    out = []
    for j, sl in enumerate(slices):
        if not isinstance(sl, np.ndarray):
            out.append(sl.draw(batch_size, rng))
            continue
        by_subject = subject_rows[data_slices.index(j)]
        rows = np.empty(batch_size, dtype=np.intp)
        for i, k in enumerate(picked):
            cands = by_subject[subjects_ref[k]]
            rows[i] = cands[0] if len(cands) == 1 else cands[rng.integers(len(cands))]
        out.append(np.asarray(sl, dtype=float)[rows])
    return Batch(slices=out)
