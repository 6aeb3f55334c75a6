"""Experiment harness: seeded sweeps, the random-moment ablation, timing
benchmarks, and CSV/manifest output.

Every cell (one trained model) derives its seed from (seed_base, value
index, repeat), so tables are reproducible and cells are independent,
which is what lets them run in a process pool.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .baselines import ImputeConfig, evaluate_baseline, impute_dataset, train_baseline
from .features import ReceptorConfig
from .model import AgentConfig
from .series import LabeledDataset, SplitSpec, split
from .synth import MpiConfig, gen_mpi
from .training import TrainConfig, evaluate, fit, prepare_instances

__all__ = [
    "couple_delta",
    "CellResult",
    "summarize",
    "sweep_signal_width",
    "sweep_receptor_width",
    "ablate_moment_network",
    "timing_benchmark",
    "export_csv",
    "write_manifest",
    "cell_seed",
]

SPLIT = SplitSpec(train=0.8, val=0.0, test=0.2)


def couple_delta(signal_width: float) -> float:
    """Receptor width coupled to the planted-signal width: max(0.05, 2w)."""
    return max(0.05, 2.0 * signal_width)


def cell_seed(seed_base: int, value_index: int, repeat: int) -> int:
    """Distinct seed per sweep cell (stable across orderings; repeats
    under 101 never collide)."""
    return seed_base + 101 * value_index + repeat


@dataclass(frozen=True)
class CellResult:
    variable: str
    value: float
    repeat: int
    seed: int
    accuracy: float
    seconds_per_epoch: float


def summarize(results: list[CellResult]) -> list[dict]:
    """Collapse per-run rows into one row per swept value with mean/std
    (sample std, zero for a single repeat)."""
    rows = []
    for value in sorted({r.value for r in results}):
        accs = np.array([r.accuracy for r in results if r.value == value])
        rows.append(
            {
                "value": value,
                "repeats": len(accs),
                "mean_acc": float(accs.mean()),
                "std_acc": float(accs.std(ddof=1)) if len(accs) > 1 else 0.0,
                "min_acc": float(accs.min()),
                "max_acc": float(accs.max()),
            }
        )
    return rows


@dataclass(frozen=True)
class _CatCell:
    variable: str
    value: float
    repeat: int
    seed: int
    mpi: MpiConfig
    rcfg: ReceptorConfig
    acfg: AgentConfig
    tcfg: TrainConfig
    random_moments: bool = False


def _run_cat_cell(cell: _CatCell) -> CellResult:
    dataset = gen_mpi(cell.mpi)
    train, _, test = split(dataset, SplitSpec(SPLIT.train, SPLIT.val, SPLIT.test, seed=cell.seed))
    store, metrics = fit(train, None, cell.rcfg, cell.acfg, cell.tcfg, random_moments=cell.random_moments)
    acc = evaluate(
        prepare_instances(test, cell.rcfg), store, cell.rcfg, cell.acfg,
        random_moments=cell.random_moments, seed=cell.seed,
    )
    per_epoch = float(np.mean([row.seconds for row in metrics.rows]))
    return CellResult(cell.variable, cell.value, cell.repeat, cell.seed, acc, per_epoch)


def _run_cells(cells: list[_CatCell], jobs: int) -> list[CellResult]:
    if jobs <= 1:
        return [_run_cat_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cat_cell, cells))


def sweep_signal_width(
    widths: list[float],
    mpi: MpiConfig,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    repeats: int = 5,
    seed_base: int = 0,
    jobs: int = 1,
    couple: bool = True,
) -> list[CellResult]:
    """Accuracy vs planted-signal width. With couple=True the receptor
    width follows couple_delta(width); otherwise rcfg.delta is used as
    given."""
    if not widths:
        raise ValueError("empty width list")
    cells = []
    for vi, width in enumerate(widths):
        delta = couple_delta(width) if couple else rcfg.delta
        cell_rcfg = ReceptorConfig(delta, rcfg.w, rcfg.alpha, rcfg.L, rcfg.use_density, rcfg.coarse_width)
        for r in range(repeats):
            seed = cell_seed(seed_base, vi, r)
            cells.append(_CatCell(
                "signal_width", width, r, seed,
                MpiConfig(mpi.n, mpi.series_len, width, seed, mpi.noise_in_window),
                cell_rcfg, acfg, replace(tcfg, seed=seed),
            ))
    return _run_cells(cells, jobs)


def sweep_receptor_width(
    deltas: list[float],
    mpi: MpiConfig,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    repeats: int = 5,
    seed_base: int = 0,
    jobs: int = 1,
) -> list[CellResult]:
    """Accuracy vs receptor width delta at a fixed planted-signal width."""
    if not deltas:
        raise ValueError("empty delta list")
    cells = []
    for vi, delta in enumerate(deltas):
        cell_rcfg = ReceptorConfig(delta, rcfg.w, rcfg.alpha, rcfg.L, rcfg.use_density, rcfg.coarse_width)
        for r in range(repeats):
            seed = cell_seed(seed_base, vi, r)
            cells.append(_CatCell(
                "delta", delta, r, seed,
                MpiConfig(mpi.n, mpi.series_len, mpi.signal_width, seed, mpi.noise_in_window),
                cell_rcfg, acfg, replace(tcfg, seed=seed),
            ))
    return _run_cells(cells, jobs)


def ablate_moment_network(
    dataset: LabeledDataset,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    repeats: int = 3,
    seed_base: int = 0,
) -> list[dict]:
    """Train the full model and the random-moment variant on the same
    splits; rows carry per-repeat accuracies for both."""
    rows = []
    for r in range(repeats):
        seed = cell_seed(seed_base, 0, r)
        train, _, test = split(dataset, SplitSpec(SPLIT.train, SPLIT.val, SPLIT.test, seed=seed))
        test_prep = prepare_instances(test, rcfg)
        cfg = replace(tcfg, seed=seed)
        for variant, random_moments in (("full", False), ("random-moments", True)):
            store, _ = fit(train, None, rcfg, acfg, cfg, random_moments=random_moments)
            acc = evaluate(test_prep, store, rcfg, acfg, random_moments=random_moments, seed=seed)
            rows.append({"variant": variant, "repeat": r, "seed": seed, "accuracy": acc})
    return rows


def timing_benchmark(
    dataset: LabeledDataset,
    methods: list[str],
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    grid_size: int = 500,
) -> list[dict]:
    """Wall-clock seconds per epoch and recurrent steps per epoch for each
    method on the same split. Timing covers the fit loop only (data
    preparation happens before the clock starts inside fit)."""
    train, _, test = split(dataset, SplitSpec(SPLIT.train, SPLIT.val, SPLIT.test, seed=tcfg.seed))
    rows = []
    for method in methods:
        if method == "cat":
            store, metrics = fit(train, None, rcfg, acfg, tcfg)
            acc = evaluate(prepare_instances(test, rcfg), store, rcfg, acfg)
        else:
            icfg = impute_config_for(method, grid_size)
            store, metrics = train_baseline(train, None, icfg, tcfg, dataset.num_classes)
            acc = evaluate_baseline(impute_dataset(test, icfg), store, icfg)
        rows.append(
            {
                "method": method,
                "epochs": len(metrics.rows),
                "seconds_per_epoch": float(np.mean([row.seconds for row in metrics.rows])),
                "recurrent_steps_per_epoch": metrics.rows[0].recurrent_steps,
                "test_acc": acc,
            }
        )
    return rows


def impute_config_for(method: str, grid_size: int) -> ImputeConfig:
    """Map a method name to its imputation settings."""
    table = {
        "gru-mean": ("mean", "none"),
        "gru-interp": ("linear", "none"),
        "gru-delta-t": ("mean", "delta_t"),
        "gru-mask": ("mean", "mask"),
    }
    if method not in table:
        raise ValueError(f"unknown method {method!r} (choices: cat, {', '.join(table)})")
    imp_method, extra = table[method]
    return ImputeConfig(grid_size, imp_method, extra)


def export_csv(rows: list[dict], columns: list[str], path: str) -> None:
    """Deterministic CSV: the given column order, one row per dict; an
    empty table still gets its header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[col] for col in columns])


def results_to_rows(results: list[CellResult]) -> list[dict]:
    return [asdict(r) for r in results]


def write_manifest(path: str, payload: dict) -> None:
    """Record every config and seed that produced a table."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
