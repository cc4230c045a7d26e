"""CLI surface: commands, artifacts, exit codes, manifests."""

import os

import numpy as np
import pytest

from streamflow.artifacts import read_manifest, verify_manifest
from streamflow.cli import main
from streamflow.ode import read_samples_binary, read_samples_csv

SMALL_TRAIN = """
output_dir = "{out}"
seed = 1

[dataset]
variant = "gaussian_mixture"
n_train = 40
n_test = 40

[train]
algorithm = "i_cfm"
iterations = 150
batch_size = 16
hidden = [16, 16]

[eval]
n_generate = 50
"""


@pytest.fixture
def train_dir(tmp_path):
    out = tmp_path / "run"
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(SMALL_TRAIN.format(out=out))
    code = main(["train", str(cfg)])
    assert code == 0
    return out


class TestTrainCommand:
    def test_artifacts_written(self, train_dir):
        assert (train_dir / "checkpoint.sfck").exists()
        assert (train_dir / "loss.csv").exists()
        assert (train_dir / "loss.png").exists()
        assert (train_dir / "manifest.json").exists()
        assert verify_manifest(train_dir) == []

    def test_rerun_is_bit_identical(self, train_dir, tmp_path):
        out2 = tmp_path / "run2"
        cfg2 = tmp_path / "cfg2.toml"
        cfg2.write_text(SMALL_TRAIN.format(out=out2))
        assert main(["train", str(cfg2)]) == 0
        # every hashed artifact reproduces, not just the checkpoint
        assert read_manifest(train_dir)["files"] == read_manifest(out2)["files"]
        assert ((out2 / "checkpoint.sfck").read_bytes()
                == (train_dir / "checkpoint.sfck").read_bytes())

    def test_invalid_key_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text(SMALL_TRAIN.format(out=tmp_path / "x") + "\nbogus_key = 1\n")
        assert main(["train", str(cfg)]) == 2

    def test_unknown_set_override_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(SMALL_TRAIN.format(out=tmp_path / "y"))
        assert main(["train", str(cfg), "--set", "train.warmup=1"]) == 2

    def test_manifest_records_config_and_seed(self, train_dir):
        doc = read_manifest(train_dir)
        assert doc["seeds"] == [1]
        assert "checkpoint.sfck" in doc["files"]


class TestGenerateCommand:
    def test_one_file_per_stop(self, train_dir, tmp_path):
        out = tmp_path / "gen"
        code = main(["generate", "--checkpoint", str(train_dir / "checkpoint.sfck"),
                     "--n", "25", "--stops", "0.5,1.0", "--out", str(out)])
        assert code == 0
        for t in ("0.5", "1"):
            stops, batches = read_samples_csv(out / f"samples_t{t}.csv")
            assert batches[0].shape == (25, 2)
        assert (out / "samples.png").exists()

    def test_single_stop_single_file(self, train_dir, tmp_path):
        out = tmp_path / "gen1"
        assert main(["generate", "--checkpoint", str(train_dir / "checkpoint.sfck"),
                     "--n", "10", "--stops", "1.0", "--out", str(out),
                     "--no-plot"]) == 0
        files = [f for f in os.listdir(out) if f.endswith(".csv")]
        assert files == ["samples_t1.csv"]

    def test_binary_format(self, train_dir, tmp_path):
        out = tmp_path / "genb"
        assert main(["generate", "--checkpoint", str(train_dir / "checkpoint.sfck"),
                     "--n", "10", "--stops", "1.0", "--out", str(out),
                     "--format", "binary", "--no-plot"]) == 0
        stops, batches = read_samples_binary(out / "samples_t1.sflw")
        assert stops == [1.0] and batches[0].shape == (10, 2)


class TestPathstatsCommand:
    def test_linear_kernel_zero_sd(self, tmp_path, capsys):
        out = tmp_path / "ps.csv"
        code = main(["pathstats", "--kernel", '{ type = "linear" }',
                     "--obs", "0:0,0", "--obs", "1:2,1", "--grid-n", "21",
                     "--out", str(out), "--no-plot"])
        assert code == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "t,dim,mean_s,sd_s,mean_sdot,sd_sdot"
        sds = [float(r.split(",")[3]) for r in rows[1:]]
        assert max(sds) <= 1e-6

    def test_se_bell_shaped_sd(self, tmp_path):
        out = tmp_path / "ps.csv"
        assert main(["pathstats", "--kernel", '{ type = "se", alpha = 1.0, l = 0.3 }',
                     "--obs", "0:0", "--obs", "1:2", "--grid-n", "21",
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()[1:]
        sds = np.array([float(r.split(",")[3]) for r in lines])
        assert sds[0] <= 1e-6 and sds[-1] <= 1e-6
        k = np.argmax(sds)
        assert 0 < k < len(sds) - 1
        assert np.all(np.diff(sds[: k + 1]) >= -1e-12)
        assert np.all(np.diff(sds[k:]) <= 1e-12)
        assert (tmp_path / "ps.png").exists()

    def test_three_pins_zero_sd_at_each(self, tmp_path):
        out = tmp_path / "ps.csv"
        assert main(["pathstats", "--kernel", '{ type = "se", alpha = 1.0, l = 0.3 }',
                     "--obs", "0:0", "--obs", "0.5:1", "--obs", "1:0",
                     "--grid-n", "21", "--out", str(out), "--no-plot"]) == 0
        lines = out.read_text().strip().splitlines()[1:]
        by_t = {float(r.split(",")[0]): float(r.split(",")[3]) for r in lines}
        for t in (0.0, 0.5, 1.0):
            assert by_t[t] <= 1e-6

    def test_bad_kernel_exits_2(self, tmp_path):
        assert main(["pathstats", "--kernel", '{ type = "mystery" }',
                     "--obs", "0:0", "--obs", "1:1",
                     "--out", str(tmp_path / "x.csv"), "--no-plot"]) == 2


class TestEvalCommand:
    def test_w2_between_sample_files(self, train_dir, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        ck = str(train_dir / "checkpoint.sfck")
        main(["generate", "--checkpoint", ck, "--n", "20", "--out", str(out_a),
              "--seed", "1", "--no-plot"])
        main(["generate", "--checkpoint", ck, "--n", "20", "--out", str(out_b),
              "--seed", "2", "--no-plot"])
        res = tmp_path / "w2.csv"
        code = main(["eval", "--a", str(out_a / "samples_t1.csv"),
                     "--b", str(out_b / "samples_t1.csv"), "--out", str(res)])
        assert code == 0
        line = res.read_text().strip().splitlines()[1]
        assert float(line.split(",")[1]) >= 0.0

    def test_identical_files_zero(self, train_dir, tmp_path, capsys):
        out_a = tmp_path / "a"
        ck = str(train_dir / "checkpoint.sfck")
        main(["generate", "--checkpoint", ck, "--n", "20", "--out", str(out_a),
              "--no-plot"])
        code = main(["eval", "--a", str(out_a / "samples_t1.csv"),
                     "--b", str(out_a / "samples_t1.csv")])
        assert code == 0
        assert "W2=0" in capsys.readouterr().out


class TestBenchCommand:
    OVR = ["train.iterations=120", "train.batch_size=16", "train.hidden=[8, 8]",
           "dataset.n_train=30", "dataset.n_test=60", "eval.n_generate=60"]

    def _set_args(self):
        out = []
        for o in self.OVR:
            out += ["--set", o]
        return out

    def test_grid_arithmetic_and_artifacts(self, tmp_path):
        out = tmp_path / "bench"
        code = main(["bench", "table1", "--seeds", "3", "--jobs", "1",
                     "--out", str(out), "--no-plot"] + self._set_args())
        assert code == 0
        metrics = (out / "metrics.csv").read_text().strip().splitlines()
        assert len(metrics) == 1 + 12  # 4 algorithms x 3 seeds
        summary = (out / "summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 4
        assert verify_manifest(out) == []

    def test_paired_seeding_fingerprints(self, tmp_path):
        out = tmp_path / "bench2"
        assert main(["bench", "table1", "--seeds", "2", "--jobs", "1",
                     "--out", str(out), "--no-plot"] + self._set_args()) == 0
        lines = (out / "fingerprints.csv").read_text().strip().splitlines()[1:]
        by_seed = {}
        for line in lines:
            alg, scheme, seed, digest = line.split(",")
            by_seed.setdefault(seed, set()).add(digest)
        for seed, digests in by_seed.items():
            assert len(digests) == 1  # same data and source draws across algorithms

    def test_partial_failure_exits_4(self, tmp_path):
        out = tmp_path / "bench3"
        code = main(["bench", "table1", "--seeds", "1", "--jobs", "1",
                     "--out", str(out), "--no-plot", "--set", "train.iterations=-5"])
        assert code == 4

    def test_unknown_override_exits_2(self, tmp_path):
        code = main(["bench", "table1", "--seeds", "1", "--jobs", "1",
                     "--out", str(tmp_path / "x"), "--set", "train.warmup=2"])
        assert code == 2

    def test_explicit_seed_list(self, tmp_path):
        out = tmp_path / "bench4"
        code = main(["bench", "table2", "--seeds", "5,9", "--jobs", "1",
                     "--out", str(out), "--no-plot"] + self._set_args())
        assert code == 0
        metrics = (out / "metrics.csv").read_text().strip().splitlines()[1:]
        seeds = {int(line.split(",")[0]) for line in metrics}
        assert seeds == {5, 9}
