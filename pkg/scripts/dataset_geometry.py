"""Render the dataset layout figures referenced by the README.

Usage: python scripts/dataset_geometry.py [out_dir]
"""

import sys

import numpy as np

from streamflow.datasets import SLICE_TIMES, DatasetSpec, generate
from streamflow.plots import plot_dataset_slices, plot_samples


def main(out_dir="docs/figures"):
    import os

    os.makedirs(out_dir, exist_ok=True)
    for variant in ("paired_v", "crossing"):
        spec = DatasetSpec(variant, n_train=300, n_test=10, seed=0)
        train, _ = generate(spec)
        slices = [None if s is None else s for s in train]
        plot_dataset_slices(slices, SLICE_TIMES, f"{out_dir}/{variant}.png")
        print(f"{out_dir}/{variant}.png")

    spec = DatasetSpec("gaussian_mixture", n_train=500, n_test=10, seed=0)
    train, _ = generate(spec)
    rng = np.random.default_rng(0)
    plot_samples([0.0, 1.0], [rng.standard_normal((500, 2)), train],
                 f"{out_dir}/two_gaussian_target.png")
    print(f"{out_dir}/two_gaussian_target.png")


if __name__ == "__main__":
    main(*sys.argv[1:])
