"""Named multi-seed benchmarks with paired seeding.

Within one benchmark seed every algorithm variant sees the same dataset
and the same generation-source draws: those streams are derived from
(benchmark, seed) alone.  Training randomness is likewise shared so two
variants differ only where the algorithms actually differ.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import hashlib

import numpy as np

from . import datasets
from .coupling import EmpiricalSource, GaussianSource
from .datasets import DatasetSpec
from .errors import ConfigurationError
from .evaluation import RunMetrics, w2
from .ode import IntegratorSpec, generate as ode_generate
from .trainer import TrainConfig, train, train_multimarginal

BENCHMARK_NAMES = ("table1", "table2", "table4", "crossing", "smoothpath")

_BENCH_IDS = {name: i + 1 for i, name in enumerate(BENCHMARK_NAMES)}
_PURPOSE_DATA, _PURPOSE_GEN, _PURPOSE_TRAIN = 11, 12, 13

_ALL_ALGORITHMS = ("i_cfm", "gp_i_cfm", "ot_cfm", "gp_ot_cfm")
_ALL_SCHEMES = ("none", "constant", "increasing", "decreasing")


def default_config(name: str) -> dict:
    """Nested default settings for one benchmark; CLI overrides merge in."""
    if name not in BENCHMARK_NAMES:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; expected one of {BENCHMARK_NAMES}"
        )
    cfg = {
        "dataset": {
            "n_train": 100,
            "n_test": 1000,
            "target_means": list(list(m) for m in datasets.TWO_GAUSSIAN_MEANS),
            "source_means": list(list(m) for m in datasets.ALT_TWO_GAUSSIAN_MEANS),
            "mixture_sd": datasets.DEFAULT_MIXTURE_SD,
        },
        "train": {
            "iterations": 5000,
            "batch_size": 128,
            "hidden": [64, 64],
            "activation": "tanh",
            "lr": 1e-3,
            # calibrated per benchmark below; the published experiments never
            # state kernel hyper-parameters, so these are reconstruction
            # choices that reproduce the reported orderings
            "kernel_alpha": 1.0,
            "kernel_l": 0.7,
            "sigma_constant": 0.2,
            "alpha_increasing": 1.0,
            "alpha_decreasing": 1.0,
        },
        "integrator": {"method": "rk4", "n_steps": 100},
        "eval": {"n_generate": 1000, "stops": [1.0]},
    }
    if name in ("table2", "table4"):
        cfg["train"]["kernel_l"] = 0.5  # variance schemes separate best here
    if name == "smoothpath":
        cfg["eval"]["stops"] = [0.25, 0.5, 0.75, 1.0]
    if name == "crossing":
        cfg["eval"]["stops"] = [0.5, 1.0]
        cfg["train"]["kernel_l"] = 0.3  # adjacent pins are 0.5 apart
    if name == "smoothpath":
        cfg["dataset"]["target_means"] = list(list(m) for m in datasets.THREE_GAUSSIAN_MEANS)
        cfg["dataset"]["source_means"] = list(list(m) for m in datasets.TWO_GAUSSIAN_MEANS)
    return cfg


def merge_config(base: dict, overrides: dict) -> dict:
    """Recursive dict merge, overrides winning; rejects unknown keys."""
    out = dict(base)
    for k, v in overrides.items():
        if k not in base:
            raise ConfigurationError(f"unknown config key {k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigurationError(f"config key {k!r} must be a table")
            out[k] = merge_config(base[k], v)
        else:
            out[k] = v
    return out


def variants(name: str) -> list[tuple[str, str]]:
    """(algorithm label, scheme label) grid of a benchmark."""
    if name == "table1":
        return [(a, "none") for a in _ALL_ALGORITHMS]
    if name in ("table2", "table4"):
        return [("gp_i_cfm", s) for s in _ALL_SCHEMES]
    if name == "crossing":
        return [("gp_i_cfm", "cov_off"), ("gp_i_cfm+cov", "cov_x0")]
    if name == "smoothpath":
        return [(a, "none") for a in _ALL_ALGORITHMS]
    raise ConfigurationError(f"unknown benchmark {name!r}")


def _derive_seed(name: str, seed: int, purpose: int) -> int:
    ss = np.random.SeedSequence((_BENCH_IDS[name], int(seed), purpose))
    return int(ss.generate_state(1)[0])


def _scheme_value(train_cfg: dict, scheme: str) -> float:
    return {
        "none": 0.0,
        "constant": train_cfg["sigma_constant"],
        "increasing": train_cfg["alpha_increasing"],
        "decreasing": train_cfg["alpha_decreasing"],
    }[scheme]


def _train_config(cfg: dict, algorithm: str, scheme: str, seed: int, name: str,
                  covariate: str = "off") -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        algorithm=algorithm,
        scheme=scheme,
        scheme_value=_scheme_value(t, scheme),
        kernel_alpha=t["kernel_alpha"],
        kernel_l=t["kernel_l"],
        covariate_mode=covariate,
        hidden=tuple(t["hidden"]),
        activation=t["activation"],
        batch_size=t["batch_size"],
        iterations=t["iterations"],
        lr=t["lr"],
        seed=_derive_seed(name, seed, _PURPOSE_TRAIN),
    )


def _integrator(cfg: dict) -> IntegratorSpec:
    i = cfg["integrator"]
    return IntegratorSpec(method=i["method"], n_steps=i["n_steps"],
                          rtol=i.get("rtol", 1e-5), atol=i.get("atol", 1e-5))


def _endpoint_data(name: str, cfg: dict, seed: int):
    """Dataset + generation sources for the two-endpoint table benchmarks."""
    ds = cfg["dataset"]
    data_seed = _derive_seed(name, seed, _PURPOSE_DATA)
    target_spec = DatasetSpec(
        "gaussian_mixture", n_train=ds["n_train"], n_test=ds["n_test"],
        seed=data_seed, means=tuple(tuple(m) for m in ds["target_means"]),
        sds=ds["mixture_sd"],
    )
    target_train, target_test = datasets.generate(target_spec)
    gen_rng = np.random.default_rng(_derive_seed(name, seed, _PURPOSE_GEN))
    n_gen = cfg["eval"]["n_generate"]
    if name in ("table4", "smoothpath"):
        source_spec = DatasetSpec(
            "gaussian_mixture", n_train=ds["n_train"], n_test=ds["n_test"],
            seed=data_seed + 1, means=tuple(tuple(m) for m in ds["source_means"]),
            sds=ds["mixture_sd"],
        )
        source_train, _ = datasets.generate(source_spec)
        source = EmpiricalSource(source_train)
        x_start = datasets.sample_gaussian_mixture(
            n_gen, source_spec.means, source_spec.sds, source_spec.weights, gen_rng
        )
    else:
        source = GaussianSource(2)
        x_start = gen_rng.standard_normal((n_gen, 2))
    return source, target_train, target_test, x_start


def _fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()


def run_single(name: str, algorithm: str, scheme: str, seed: int, cfg: dict):
    """Execute one (variant, seed) run; returns (metrics rows, fingerprint, artifacts)."""
    if name in ("table1", "table2", "table4", "smoothpath"):
        return _run_endpoint(name, algorithm, scheme, seed, cfg)
    if name == "crossing":
        return _run_crossing(algorithm, scheme, seed, cfg)
    raise ConfigurationError(f"unknown benchmark {name!r}")


def _run_endpoint(name, algorithm, scheme, seed, cfg):
    source, target_train, target_test, x_start = _endpoint_data(name, cfg, seed)
    tc = _train_config(cfg, algorithm, scheme, seed, name)
    t0 = time.perf_counter()
    model, trace = train(tc, (source, target_train))
    t1 = time.perf_counter()
    stops = [float(s) for s in cfg["eval"]["stops"]]
    batches = ode_generate(model, x_start, _integrator(cfg), stops)
    t2 = time.perf_counter()
    val = w2(batches[stops.index(1.0)], target_test)
    metrics = [RunMetrics(seed=seed, algorithm=algorithm, scheme=scheme, w2=val,
                          train_seconds=t1 - t0, generate_seconds=t2 - t1)]
    artifacts = {"stops": stops, "batches": batches, "trace": trace}
    return metrics, _fingerprint(target_test, x_start), artifacts


def _run_crossing(algorithm, scheme, seed, cfg):
    ds = cfg["dataset"]
    data_seed = _derive_seed("crossing", seed, _PURPOSE_DATA)
    spec = DatasetSpec("crossing", n_train=ds["n_train"], n_test=ds["n_test"], seed=data_seed)
    train_slices, test_slices = datasets.generate(spec)
    groups = np.arange(len(train_slices[0]))
    covariate = "x0" if scheme == "cov_x0" else "off"
    tc = _train_config(cfg, "gp_i_cfm", "none", seed, "crossing", covariate=covariate)

    t0 = time.perf_counter()
    model, trace = train_multimarginal(tc, train_slices, [groups] * 3, datasets.SLICE_TIMES)
    t1 = time.perf_counter()

    x_start = test_slices[0]
    cs = x_start if covariate == "x0" else None
    stops = [float(s) for s in cfg["eval"]["stops"]]
    batches = ode_generate(model, x_start, _integrator(cfg), stops, c=cs)
    t2 = time.perf_counter()

    metrics = []
    for stop, batch in zip(stops, batches):
        ref = test_slices[datasets.SLICE_TIMES.index(stop)]
        metrics.append(RunMetrics(seed=seed, algorithm=algorithm, scheme=f"t{stop:g}",
                                  w2=w2(batch, ref),
                                  train_seconds=t1 - t0, generate_seconds=t2 - t1))
    artifacts = {"stops": stops, "batches": batches, "trace": trace}
    return metrics, _fingerprint(*(s for s in test_slices)), artifacts


def run_paired_v_comparison(seed: int, cfg: dict | None = None):
    """Single multi-slice model vs a two-model straight-interpolant pipeline.

    Both consume the same paired dataset and the same noise starts.
    Returns {label: {stop: w2}} for labels 'joint' and 'pipeline'.
    """
    cfg = cfg or default_config("crossing")
    ds = cfg["dataset"]
    data_seed = _derive_seed("crossing", seed, _PURPOSE_DATA) + 7
    spec = DatasetSpec("paired_v", n_train=ds["n_train"], n_test=ds["n_test"], seed=data_seed)
    train_slices, test_slices = datasets.generate(spec)
    _, mid_train, end_train = train_slices
    _, mid_test, end_test = test_slices
    groups = np.arange(len(mid_train))
    n_gen = cfg["eval"]["n_generate"]
    gen_rng = np.random.default_rng(_derive_seed("crossing", seed, _PURPOSE_GEN) + 7)
    x_start = gen_rng.standard_normal((n_gen, 2))
    integ = _integrator(cfg)
    train_seed = _derive_seed("crossing", seed, _PURPOSE_TRAIN) + 7

    joint_cfg = _base_train_config(cfg, "gp_i_cfm", train_seed)
    joint_model, _ = train_multimarginal(
        joint_cfg, [GaussianSource(2), mid_train, end_train], [None, groups, groups],
        datasets.SLICE_TIMES,
    )
    joint_mid, joint_end = ode_generate(joint_model, x_start, integ, [0.5, 1.0])

    seg_cfg = _base_train_config(cfg, "i_cfm", train_seed)
    model_a, _ = train(seg_cfg, (GaussianSource(2), mid_train))
    model_b, _ = train(replace(seg_cfg, seed=train_seed + 1),
                       (EmpiricalSource(mid_train), end_train))
    (pipe_mid,) = ode_generate(model_a, x_start, integ, [1.0])
    (pipe_end,) = ode_generate(model_b, pipe_mid, integ, [1.0])

    return {
        "joint": {0.5: w2(joint_mid, mid_test), 1.0: w2(joint_end, end_test)},
        "pipeline": {0.5: w2(pipe_mid, mid_test), 1.0: w2(pipe_end, end_test)},
    }


def _paired_v_worker(args):
    seed, cfg = args
    return seed, run_paired_v_comparison(seed, cfg)


def run_paired_v_grid(seeds, cfg: dict | None = None, jobs: int = 1):
    """run_paired_v_comparison over many seeds, optionally in parallel."""
    cfg = cfg or default_config("crossing")
    grid = [(int(s), cfg) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return dict(pool.map(_paired_v_worker, grid))
    return dict(_paired_v_worker(g) for g in grid)


def _base_train_config(cfg: dict, algorithm: str, seed: int) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        algorithm=algorithm, kernel_alpha=t["kernel_alpha"], kernel_l=t["kernel_l"],
        hidden=tuple(t["hidden"]), activation=t["activation"],
        batch_size=t["batch_size"], iterations=t["iterations"], lr=t["lr"], seed=seed,
    )


def _worker(args):
    name, algorithm, scheme, seed, cfg = args
    try:
        metrics, fingerprint, _ = run_single(name, algorithm, scheme, seed, cfg)
        return ("ok", metrics, fingerprint, (algorithm, scheme, seed))
    except Exception as exc:  # noqa: BLE001 - reported as a partial failure
        return ("error", f"{type(exc).__name__}: {exc}", None, (algorithm, scheme, seed))


def run_benchmark(name: str, seeds, jobs: int = 1, overrides: dict | None = None):
    """Run the full variant x seed grid.

    Returns (runs, fingerprints, failures): metrics rows in a stable order,
    the per-(variant, seed) data fingerprints, and a list of
    (variant, seed, message) for runs that raised.
    """
    cfg = merge_config(default_config(name), overrides or {})
    grid = [(name, a, s, int(seed), cfg) for seed in seeds for a, s in variants(name)]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_worker, grid))
    else:
        results = [_worker(g) for g in grid]

    runs, fingerprints, failures = [], {}, []
    for status, payload, fingerprint, key in results:
        if status == "ok":
            runs.extend(payload)
            fingerprints[key] = fingerprint
        else:
            failures.append((key, payload))
    return runs, fingerprints, failures
