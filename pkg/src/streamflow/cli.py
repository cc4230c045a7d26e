"""Command-line experiment surface.

Subcommands: train, generate, bench, pathstats, eval.  Report-producing
commands render matplotlib figures next to their delimited output unless
--no-plot is given.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 partial benchmark failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import artifacts, benchmarks, datasets, plots
from .config import dataset_spec_from_config, load_experiment, parse_toml
from .coupling import EmpiricalSource, GaussianSource
from .errors import ConfigurationError, NumericalError
from .evaluation import summarize, w2, write_metrics_csv, write_summary_csv
from .gp_stream import ObservationSet, ZeroMean, path_stats, write_path_stats_csv
from .kernels import build_gram, kernel_from_config
from .ode import (
    IntegratorSpec,
    generate as ode_generate,
    read_samples_csv,
    write_samples_binary,
    write_samples_csv,
)
from .trainer import train, train_multimarginal, write_loss_trace_csv
from .vector_field import load_checkpoint, save_checkpoint

JOBS_ENV = "STREAMFLOW_JOBS"


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, os.cpu_count() or 1)


def cmd_train(args) -> int:
    with open(args.config) as fh:
        text = fh.read()
    cfg = load_experiment(text, args.set or [])
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)

    spec = dataset_spec_from_config(cfg.dataset, cfg.seed)
    train_data, _ = datasets.generate(spec)
    if spec.variant in ("paired_v", "crossing"):
        groups = [None if s is None else np.arange(len(s)) for s in train_data]
        slices = [GaussianSource(2) if s is None else s for s in train_data]
        model, trace = train_multimarginal(cfg.train, slices, groups, datasets.SLICE_TIMES)
    else:
        if "source_means" in cfg.dataset:
            src_spec = dataset_spec_from_config(
                {
                    "variant": "gaussian_mixture",
                    "n_train": cfg.dataset["n_train"],
                    "n_test": cfg.dataset["n_test"],
                    "means": cfg.dataset["source_means"],
                    "sds": cfg.dataset.get("source_sds", datasets.DEFAULT_MIXTURE_SD),
                },
                cfg.seed + 1,
            )
            src_rows, _ = datasets.generate(src_spec)
            source = EmpiricalSource(src_rows)
        else:
            source = GaussianSource(train_data.shape[1])
        model, trace = train(cfg.train, (source, train_data))

    save_checkpoint(os.path.join(out, "checkpoint.sfck"), model)
    write_loss_trace_csv(os.path.join(out, "loss.csv"), trace)
    if not args.no_plot and trace:
        plots.plot_loss_trace(trace, os.path.join(out, "loss.png"))
    artifacts.write_manifest(out, "train", text + "\n# set: " + repr(args.set or []),
                             [cfg.seed])
    print(f"wrote checkpoint and loss trace to {out}")
    return 0


def cmd_generate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    stops = [float(s) for s in args.stops.split(",") if s]
    spec = IntegratorSpec(method=args.method, n_steps=args.n_steps,
                          rtol=args.rtol, atol=args.atol)
    rng = np.random.default_rng(args.seed)
    x0 = rng.standard_normal((args.n, model.arch.d))
    cs = None
    if model.arch.d_c:
        if model.arch.d_c != model.arch.d:
            raise ConfigurationError(
                "checkpoint is covariate-conditioned with d_c != d; "
                "generation needs explicit covariates"
            )
        cs = x0
    batches = ode_generate(model, x0, spec, stops, c=cs)

    out = args.out
    os.makedirs(out, exist_ok=True)
    written = []
    for t, batch in zip(stops, batches):
        if args.format == "binary":
            path = os.path.join(out, f"samples_t{t:g}.sflw")
            write_samples_binary(path, [t], [batch])
        else:
            path = os.path.join(out, f"samples_t{t:g}.csv")
            write_samples_csv(path, [t], [batch])
        written.append(path)
    if not args.no_plot:
        plots.plot_samples(stops, batches, os.path.join(out, "samples.png"))
    artifacts.write_manifest(out, "generate",
                             f"checkpoint={args.checkpoint} stops={stops} n={args.n}",
                             [args.seed])
    for p in written:
        print(p)
    return 0


def _parse_seeds(raw: str) -> list[int]:
    if "," in raw:
        return [int(s) for s in raw.split(",") if s]
    return list(range(int(raw)))


def cmd_bench(args) -> int:
    overrides: dict = {}
    for expr in args.set or []:
        from .config import parse_set_override

        path, value = parse_set_override(expr)
        node = overrides
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value

    seeds = _parse_seeds(args.seeds)
    runs, fingerprints, failures = benchmarks.run_benchmark(
        args.benchmark, seeds, jobs=args.jobs, overrides=overrides
    )
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_metrics_csv(os.path.join(out, "metrics.csv"), runs)
    summary = []
    if runs:
        summary = summarize(runs)
        write_summary_csv(os.path.join(out, "summary.csv"), summary)
        if not args.no_plot:
            plots.plot_summary(summary, os.path.join(out, "summary.png"))
    with open(os.path.join(out, "fingerprints.csv"), "w") as fh:
        fh.write("algorithm,scheme,seed,data_sha256\n")
        for (alg, scheme, seed), digest in sorted(fingerprints.items()):
            fh.write(f"{alg},{scheme},{seed},{digest}\n")
    artifacts.write_manifest(out, f"bench {args.benchmark}",
                             repr(sorted(overrides.items())), seeds)

    for key, mean, se, n in summary:
        print(f"{'/'.join(str(k) for k in key)}: W2 = {mean:.4f} +- {se:.4f} (n={n})")
    if failures:
        for key, msg in failures:
            print(f"FAILED run {key}: {msg}", file=sys.stderr)
        return 4
    return 0


def cmd_pathstats(args) -> int:
    kernel = kernel_from_config(parse_toml(f"kernel = {args.kernel}")["kernel"])
    times, values = [], []
    for spec in args.obs:
        t_s, vals = spec.split(":", 1)
        times.append(float(t_s))
        values.append([float(v) for v in vals.split(",")])
    obs = ObservationSet(times=np.array(times), values=np.array(values))
    bundle = build_gram(kernel, obs.times)
    grid = np.linspace(0.0, 1.0, args.grid_n)
    rows = path_stats(bundle, ZeroMean(), obs, grid)
    write_path_stats_csv(args.out, rows)
    if not args.no_plot:
        plots.plot_path_stats(rows, os.path.splitext(args.out)[0] + ".png")
    print(args.out)
    return 0


def cmd_eval(args) -> int:
    stops_a, batches_a = read_samples_csv(args.a)
    stops_b, batches_b = read_samples_csv(args.b)
    if stops_a != stops_b:
        raise ConfigurationError(f"stop sets differ: {stops_a} vs {stops_b}")
    lines = []
    for t, ba, bb in zip(stops_a, batches_a, batches_b):
        lines.append((t, w2(ba, bb)))
        print(f"t={t:g} W2={lines[-1][1]:.6g}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("t,w2\n")
            for t, v in lines:
                fh.write(f"{t:g},{v:.17g}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamflow",
                                description="Stream-level flow-matching experiments")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a TOML config")
    t.add_argument("config")
    t.add_argument("--set", action="append", metavar="KEY=VALUE")
    t.add_argument("--out", help="override the config's output_dir")
    t.add_argument("--no-plot", action="store_true")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="sample from a trained checkpoint")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--stops", default="1.0", help="comma-separated stop times")
    g.add_argument("--method", default="rk4", choices=["euler", "rk4", "dopri5"])
    g.add_argument("--n-steps", type=int, default=100)
    g.add_argument("--rtol", type=float, default=1e-5)
    g.add_argument("--atol", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", default="csv", choices=["csv", "binary"])
    g.add_argument("--out", default="runs/generate")
    g.add_argument("--no-plot", action="store_true")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="run a named multi-seed benchmark")
    b.add_argument("benchmark", choices=list(benchmarks.BENCHMARK_NAMES))
    b.add_argument("--seeds", default="30",
                   help="seed count (e.g. 30) or explicit list (e.g. 0,1,2)")
    b.add_argument("--jobs", type=int, default=_default_jobs())
    b.add_argument("--set", action="append", metavar="KEY=VALUE")
    b.add_argument("--out", default="runs/bench")
    b.add_argument("--no-plot", action="store_true")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("pathstats", help="conditional stream envelope statistics")
    s.add_argument("--kernel", default='{ type = "se", alpha = 1.0, l = 0.3 }',
                   help="inline TOML kernel table")
    s.add_argument("--obs", action="append", required=True,
                   metavar="T:V1,V2", help="pinned observation, e.g. 0:0,0")
    s.add_argument("--grid-n", type=int, default=101)
    s.add_argument("--out", default="pathstats.csv")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_pathstats)

    e = sub.add_parser("eval", help="W2 between two sample CSV files")
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
