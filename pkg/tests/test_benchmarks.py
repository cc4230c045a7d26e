"""Benchmark grid plumbing with miniature budgets."""

import pytest

from streamflow.benchmarks import (
    BENCHMARK_NAMES,
    default_config,
    merge_config,
    run_benchmark,
    run_paired_v_comparison,
    run_single,
    variants,
)
from streamflow.errors import ConfigurationError

TINY = {
    "dataset": {"n_train": 25, "n_test": 40},
    "train": {"iterations": 80, "batch_size": 16, "hidden": [8, 8]},
    "eval": {"n_generate": 40},
}


class TestConfigPlumbing:
    def test_default_configs_exist(self):
        for name in BENCHMARK_NAMES:
            cfg = default_config(name)
            assert {"dataset", "train", "integrator", "eval"} <= set(cfg)

    def test_unknown_benchmark(self):
        with pytest.raises(ConfigurationError):
            default_config("table9")

    def test_merge_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            merge_config(default_config("table1"), {"train": {"warmup": 1}})

    def test_merge_overrides_values(self):
        cfg = merge_config(default_config("table1"), {"train": {"iterations": 7}})
        assert cfg["train"]["iterations"] == 7
        assert cfg["train"]["batch_size"] == 128  # untouched defaults survive

    def test_variant_grids(self):
        assert len(variants("table1")) == 4
        assert [s for _, s in variants("table2")] == ["none", "constant",
                                                      "increasing", "decreasing"]
        assert len(variants("crossing")) == 2


class TestRunSingle:
    def test_endpoint_run_produces_metric(self):
        cfg = merge_config(default_config("table1"), TINY)
        metrics, fingerprint, artifacts = run_single("table1", "i_cfm", "none", 0, cfg)
        assert len(metrics) == 1
        assert metrics[0].w2 >= 0
        assert len(fingerprint) == 64
        assert artifacts["batches"][0].shape == (40, 2)

    def test_crossing_run_reports_both_stops(self):
        cfg = merge_config(default_config("crossing"), TINY)
        metrics, _, _ = run_single("crossing", "gp_i_cfm", "cov_off", 0, cfg)
        assert {m.scheme for m in metrics} == {"t0.5", "t1"}

    def test_fingerprint_paired_across_variants(self):
        cfg = merge_config(default_config("table1"), TINY)
        _, fp_a, _ = run_single("table1", "i_cfm", "none", 3, cfg)
        _, fp_b, _ = run_single("table1", "gp_ot_cfm", "none", 3, cfg)
        assert fp_a == fp_b

    def test_fingerprint_differs_across_seeds(self):
        cfg = merge_config(default_config("table1"), TINY)
        _, fp_a, _ = run_single("table1", "i_cfm", "none", 0, cfg)
        _, fp_b, _ = run_single("table1", "i_cfm", "none", 1, cfg)
        assert fp_a != fp_b


class TestRunBenchmark:
    def test_grid_and_failure_reporting(self):
        runs, fingerprints, failures = run_benchmark("table1", [0, 1], jobs=1,
                                                     overrides=TINY)
        assert not failures
        assert len(runs) == 8
        assert len(fingerprints) == 8

    def test_parallel_matches_serial(self):
        runs_s, _, _ = run_benchmark("table2", [0], jobs=1, overrides=TINY)
        runs_p, _, _ = run_benchmark("table2", [0], jobs=2, overrides=TINY)
        a = {(r.algorithm, r.scheme, r.seed): r.w2 for r in runs_s}
        b = {(r.algorithm, r.scheme, r.seed): r.w2 for r in runs_p}
        assert a == b

    def test_failures_recorded_per_run(self):
        bad = dict(TINY, train=dict(TINY["train"], iterations=-1))
        runs, _, failures = run_benchmark("table1", [0], jobs=1, overrides=bad)
        assert runs == []
        assert len(failures) == 4


class TestPairedSlicesComparison:
    def test_returns_w2_per_stop_for_both_pipelines(self):
        cfg = merge_config(default_config("crossing"), TINY)
        out = run_paired_v_comparison(0, cfg)
        assert set(out) == {"joint", "pipeline"}
        for label in out:
            assert set(out[label]) == {0.5, 1.0}
            assert all(v >= 0 for v in out[label].values())
