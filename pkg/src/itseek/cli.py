"""Command-line interface.

    itseek gen-mpi --n 5000 --len 500 --delta 0.10 --seed 1 --out mpi.jsonl
    itseek train --data mpi.jsonl --config cat.cfg --out run/
    itseek eval --data mpi.jsonl --checkpoint run/best.ckpt
    itseek probe --csv recording.csv --out windows.jsonl
    itseek downsample --data uwave.jsonl --fraction 0.1 --seed 0 --out sparse.jsonl
    itseek sweep --kind signal-width --values 0.04,0.06,0.10 --out sweep/
    itseek ablate --data mpi.jsonl --out ablation/
    itseek bench --data mpi.jsonl --methods cat,gru-mean --out bench/

Every command exits 0 on success and 1 with an `error:` line on failure;
argparse handles usage errors with exit code 2. Configuration precedence
is defaults < --config file < ITSEEK_* environment < --set key=value.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys

from .autodiff import load_checkpoint, save_checkpoint
from .baselines import evaluate_baseline, impute_dataset, train_baseline
from .config import ConfigError, RunConfig
from .experiments import (
    ablate_moment_network,
    couple_delta,
    export_csv,
    results_to_rows,
    summarize,
    sweep_receptor_width,
    sweep_signal_width,
    timing_benchmark,
    write_manifest,
)
from .series import DatasetError, Instance, LabeledDataset, read_dataset, split, write_dataset
from .synth import MpiConfig, ProbeConfig, gen_mpi, listening_probe, random_downsample, read_regular_csv
from .training import evaluate, fit, prepare_instances

__all__ = ["main"]


def _load_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.load(getattr(args, "config", None), getattr(args, "set", None) or [])


def _cmd_gen_mpi(args: argparse.Namespace) -> int:
    cfg = MpiConfig(args.n, args.len, args.delta, args.seed, args.noise_in_window)
    dataset = gen_mpi(cfg)
    write_dataset(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset)} series, {dataset.num_classes} classes")
    return 0


def _cmd_probe(args: argparse.Namespace) -> int:
    times, records = read_regular_csv(args.csv)
    windows = listening_probe(times, records, ProbeConfig(args.gamma, args.window_len), args.prefix)
    instances = [Instance(series, args.label, origin) for series, origin in windows]
    num_classes = max(2, args.label + 1)
    dataset = LabeledDataset(instances, num_classes, {"name": "probe", "seed": None, "source": args.csv})
    write_dataset(dataset, args.out)
    kept = sum(inst.series.num_observations() for inst in instances)
    print(f"wrote {args.out}: {len(instances)} windows from {len(times)} records ({kept} observations kept)")
    return 0


def _cmd_downsample(args: argparse.Namespace) -> int:
    dataset = read_dataset(args.data)
    instances = [
        Instance(random_downsample(inst.series, args.fraction, args.seed, stream=i), inst.label, inst.origin_t0)
        for i, inst in enumerate(dataset.instances)
    ]
    meta = dict(dataset.metadata)
    meta.update(downsample_fraction=args.fraction, downsample_seed=args.seed)
    write_dataset(LabeledDataset(instances, dataset.num_classes, meta), args.out)
    print(f"wrote {args.out}: {len(instances)} series at fraction {args.fraction}")
    return 0


def _split_for(cfg: RunConfig, dataset: LabeledDataset):
    return split(dataset, cfg.split_spec())


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    dataset = read_dataset(args.data)
    if dataset.num_classes != cfg.num_classes:
        cfg = RunConfig(**{**cfg.to_dict(), "num_classes": dataset.num_classes})
    train_set, val_set, _ = _split_for(cfg, dataset)
    val_arg = val_set if len(val_set) else None
    os.makedirs(args.out, exist_ok=True)
    if cfg.method == "cat":
        store, metrics = fit(
            train_set, val_arg, cfg.receptor(), cfg.agent(), cfg.train(),
            random_moments=args.random_moments, log=not args.quiet,
        )
    else:
        store, metrics = train_baseline(
            train_set, val_arg, cfg.impute(), cfg.train(), cfg.num_classes, cfg.baseline_hidden,
            log=not args.quiet,
        )
    ckpt_path = os.path.join(args.out, "best.ckpt")
    payload = {"run_config": cfg.to_dict(), "data": args.data, "random_moments": args.random_moments}
    save_checkpoint(ckpt_path, store, payload)
    metrics.write_csv(os.path.join(args.out, "metrics.csv"))
    write_manifest(os.path.join(args.out, "manifest.json"), payload)
    best = max(row.acc_val for row in metrics.rows)
    print(f"wrote {ckpt_path}: {len(metrics.rows)} epochs, best val acc {best:.3f}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    store, payload = load_checkpoint(args.checkpoint)
    cfg = RunConfig(**payload["run_config"])
    dataset = read_dataset(args.data)
    if args.split == "all":
        subset = dataset
    else:
        train_set, val_set, test_set = _split_for(cfg, dataset)
        subset = {"train": train_set, "val": val_set, "test": test_set}[args.split]
    if len(subset) == 0:
        raise DatasetError(f"split {args.split!r} is empty")
    random_moments = bool(payload.get("random_moments"))
    if cfg.method == "cat":
        acc = evaluate(
            prepare_instances(subset, cfg.receptor()), store, cfg.receptor(), cfg.agent(),
            random_moments=random_moments, seed=cfg.seed,
        )
    else:
        acc = evaluate_baseline(impute_dataset(subset, cfg.impute()), store, cfg.impute(), cfg.baseline_hidden)
    print(f"accuracy {acc:.3f}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    values = [float(x) for x in args.values.split(",") if x.strip()]
    if not values:
        raise ConfigError("--values is empty")
    os.makedirs(args.out, exist_ok=True)
    common = dict(
        mpi=cfg.mpi(), rcfg=cfg.receptor(), acfg=cfg.agent(), tcfg=cfg.train(),
        repeats=args.repeats, seed_base=cfg.seed, jobs=args.jobs,
    )
    if args.kind == "signal-width":
        results = sweep_signal_width(values, **common)
    else:
        results = sweep_receptor_width(values, **common)
    runs = results_to_rows(results)
    summary = summarize(results)
    export_csv(runs, ["variable", "value", "repeat", "seed", "accuracy", "seconds_per_epoch"],
               os.path.join(args.out, "runs.csv"))
    export_csv(summary, ["value", "repeats", "mean_acc", "std_acc", "min_acc", "max_acc"],
               os.path.join(args.out, "summary.csv"))
    write_manifest(os.path.join(args.out, "manifest.json"),
                   {"kind": args.kind, "values": values, "repeats": args.repeats,
                    "jobs": args.jobs, "run_config": cfg.to_dict(),
                    "coupled_delta": {v: couple_delta(v) for v in values} if args.kind == "signal-width" else None})
    for row in summary:
        print(f"{args.kind} {row['value']}: acc {row['mean_acc']:.3f} +- {row['std_acc']:.3f} ({row['repeats']} runs)")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    dataset = read_dataset(args.data)
    rows = ablate_moment_network(dataset, cfg.receptor(), cfg.agent(), cfg.train(),
                                 repeats=args.repeats, seed_base=cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    export_csv(rows, ["variant", "repeat", "seed", "accuracy"], os.path.join(args.out, "ablation.csv"))
    write_manifest(os.path.join(args.out, "manifest.json"),
                   {"data": args.data, "repeats": args.repeats, "run_config": cfg.to_dict()})
    for variant in ("full", "random-moments"):
        accs = [r["accuracy"] for r in rows if r["variant"] == variant]
        print(f"{variant}: median acc {statistics.median(accs):.3f} over {len(accs)} runs")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    dataset = read_dataset(args.data)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = timing_benchmark(dataset, methods, cfg.receptor(), cfg.agent(), cfg.train(), cfg.grid_size)
    os.makedirs(args.out, exist_ok=True)
    export_csv(rows, ["method", "epochs", "seconds_per_epoch", "recurrent_steps_per_epoch", "test_acc"],
               os.path.join(args.out, "timing.csv"))
    write_manifest(os.path.join(args.out, "manifest.json"),
                   {"data": args.data, "methods": methods, "run_config": cfg.to_dict()})
    for row in rows:
        print(f"{row['method']}: {row['seconds_per_epoch']:.2f}s/epoch, "
              f"{row['recurrent_steps_per_epoch']} recurrent steps/epoch, test acc {row['test_acc']:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itseek", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-mpi", help="generate the planted-signal benchmark")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--len", type=int, default=500)
    p.add_argument("--delta", type=float, default=0.10, help="planted signal width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-in-window", action="store_true",
                   help="let noise timestamps fall inside the signal window")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_mpi)

    p = sub.add_parser("probe", help="split a dense recording into sparse windows")
    p.add_argument("--csv", required=True, help="dense recording: t,ch0[,ch1,...]")
    p.add_argument("--gamma", type=float, default=0.001)
    p.add_argument("--window-len", type=int, default=200)
    p.add_argument("--label", type=int, default=0)
    p.add_argument("--prefix", default="probe")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("downsample", help="randomly thin every series")
    p.add_argument("--data", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_downsample)

    def add_config_args(p):
        p.add_argument("--config", default=None, help="key = value file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("train", help="train a model and write checkpoint + metrics")
    p.add_argument("--data", required=True)
    add_config_args(p)
    p.add_argument("--random-moments", action="store_true",
                   help="ablation: uniform random moments instead of the policy")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="accuracy vs signal width or receptor width")
    p.add_argument("--kind", choices=("signal-width", "receptor-width"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ablate", help="full model vs random-moment ablation")
    p.add_argument("--data", required=True)
    p.add_argument("--repeats", type=int, default=3)
    add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("bench", help="timing comparison across methods")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="cat,gru-mean")
    add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
