"""Deterministic synthetic datasets for the 2D benchmarks.

The mixture layouts are reconstructions: the reference figures show the
shapes but never print coordinates, so the component locations below are
package defaults chosen to match the published scale.  All of them are
config-overridable.  Train and test sets come from disjoint child streams
of the dataset seed.

Multi-slice layouts (aligned rows = one subject):

* ``paired_v``: noise at t=0; at t=0.5 two arms at (1.5, +-1.5); at t=1 the
  same arms continued outward to (3, +-3).  A subject keeps its arm and its
  radial scale across slices, so the slices are correlated.
* ``crossing``: two clusters at t=0 on the left side (-3, +-1.5); at t=0.5
  each subject jumps to the right side with its vertical position flipped;
  at t=1 it returns to its start.  Top and bottom streams cross twice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TWO_GAUSSIAN_MEANS = ((-3.0, 3.0), (3.0, -3.0))
THREE_GAUSSIAN_MEANS = ((-3.0, 3.0), (3.0, -3.0), (0.0, 3.5))
ALT_TWO_GAUSSIAN_MEANS = ((-3.0, -3.0), (3.0, 3.0))
DEFAULT_MIXTURE_SD = 0.5

VARIANTS = ("std_gaussian", "gaussian_mixture", "paired_v", "crossing")


@dataclass(frozen=True)
class DatasetSpec:
    variant: str
    n_train: int
    n_test: int
    seed: int
    d: int = 2
    means: tuple = TWO_GAUSSIAN_MEANS
    sds: tuple | float = DEFAULT_MIXTURE_SD
    weights: tuple | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown dataset variant {self.variant!r}")
        if self.variant == "gaussian_mixture":
            k = len(self.means)
            sds = self.sds if isinstance(self.sds, (tuple, list)) else (self.sds,) * k
            weights = self.weights if self.weights is not None else (1.0 / k,) * k
            if len(sds) != k or len(weights) != k:
                raise ConfigurationError("means, sds and weights must have equal length")
            if any(s <= 0 for s in sds):
                raise ConfigurationError("mixture sds must be positive")
            if abs(sum(weights) - 1.0) > 1e-12:
                raise ConfigurationError(f"mixture weights must sum to 1, got {sum(weights)}")
            object.__setattr__(self, "sds", tuple(float(s) for s in sds))
            object.__setattr__(self, "weights", tuple(float(w) for w in weights))
            object.__setattr__(self, "means", tuple(tuple(float(v) for v in m) for m in self.means))

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def sample_gaussian_mixture(n, means, sds, weights, rng) -> np.ndarray:
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    comp = rng.choice(len(means), size=n, p=np.asarray(weights, dtype=float))
    return means[comp] + sds[comp, None] * rng.standard_normal((n, means.shape[1]))


def _paired_v(n, rng):
    arm = np.where(rng.integers(2, size=n) == 1, 1.0, -1.0)
    scale = rng.uniform(0.8, 1.2, size=n)
    mid = np.column_stack([1.5 * scale, 1.5 * arm * scale]) + 0.25 * rng.standard_normal((n, 2))
    end = np.column_stack([3.0 * scale, 3.0 * arm * scale]) + 0.25 * rng.standard_normal((n, 2))
    return [None, mid, end]


def _crossing(n, rng):
    cluster = np.where(rng.integers(2, size=n) == 1, 1.0, -1.0)
    y = 1.5 * cluster + 0.3 * rng.standard_normal(n)
    start = np.column_stack([np.full(n, -3.0), y])
    mid = np.column_stack([np.full(n, 3.0), -y + 0.2 * rng.standard_normal(n)])
    end = np.column_stack([np.full(n, -3.0), y + 0.2 * rng.standard_normal(n)])
    return [start, mid, end]


SLICE_TIMES = (0.0, 0.5, 1.0)


def generate(spec: DatasetSpec):
    """Draw (train, test) for a dataset spec.

    Point-cloud variants return (n, d) matrices; the multi-slice layouts
    return lists of slices aligned by subject row, with None marking a
    standard-Gaussian noise slice.
    """
    train_rng, test_rng = (np.random.default_rng(s) for s in
                           np.random.SeedSequence(spec.seed).spawn(2))

    def draw(n, rng):
        if spec.variant == "std_gaussian":
            return rng.standard_normal((n, spec.d))
        if spec.variant == "gaussian_mixture":
            return sample_gaussian_mixture(n, spec.means, spec.sds, spec.weights, rng)
        if spec.variant == "paired_v":
            return _paired_v(n, rng)
        return _crossing(n, rng)

    return draw(spec.n_train, train_rng), draw(spec.n_test, test_rng)


DATASET_CSV_HEADER = "slice,row,dim,value"


def write_dataset_csv(path, slices, spec: DatasetSpec | None = None) -> None:
    """Long-format export with a sidecar spec file for exact reproduction."""
    if isinstance(slices, np.ndarray):
        slices = [slices]
    with open(path, "w") as fh:
        fh.write(DATASET_CSV_HEADER + "\n")
        for j, sl in enumerate(slices):
            if sl is None:
                continue
            for r, row in enumerate(np.atleast_2d(sl)):
                for dim, v in enumerate(row):
                    fh.write(f"{j},{r},{dim},{v:.17g}\n")
    if spec is not None:
        with open(str(path) + ".spec.json", "w") as fh:
            fh.write(spec.to_json() + "\n")
