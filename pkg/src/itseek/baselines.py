"""Imputation baselines: rasterize each irregular series onto a fixed
grid and classify with a GRU unrolled over every bin.

These exist as the comparison point: they touch grid_size recurrent steps
per series where the receptor model touches K, and on long timelines with
localized evidence they have to carry the signal across hundreds of
steps. The imputation itself is conventional: per-channel bin means,
empty bins filled with the channel mean or by linear interpolation, with
optional time-since-last-observation or observed-mask columns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore, Tape, adam_step, forward_gru_cell, forward_linear, init_gru, init_linear
from .series import EmptySeries, IrregularSeries, LabeledDataset, max_timestamp
from .training import EpochRow, RunMetrics, TrainConfig, _tag, cross_entropy

__all__ = [
    "ImputeConfig",
    "impute",
    "init_baseline",
    "train_baseline",
    "evaluate_baseline",
    "impute_dataset",
]


@dataclass(frozen=True)
class ImputeConfig:
    grid_size: int = 500
    method: str = "mean"
    extra: str = "none"

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.method not in ("mean", "linear"):
            raise ValueError(f"unknown imputation method {self.method!r}")
        if self.extra not in ("none", "delta_t", "mask"):
            raise ValueError(f"unknown extra feature {self.extra!r}")

    @property
    def step_features(self) -> int:
        return 2 if self.extra != "none" else 1


def impute(series: IrregularSeries, cfg: ImputeConfig) -> np.ndarray:
    """Rasterize to a (grid_size, step_features * D) array.

    Timestamps are normalized by the series maximum; bin k covers
    [k/T, (k+1)/T) with the final bin closed. Occupied bins hold the bin
    mean. Empty bins: channel mean of the observed values (method
    "mean") or linear interpolation between the nearest occupied bins,
    extended flat at the edges ("linear"). A channel with no observations
    fills with zeros. Extras per channel: "delta_t" is normalized time
    since the last occupied bin (0 at occupied bins, accumulating from
    the start otherwise); "mask" is the 0/1 occupancy.
    """
    grid = cfg.grid_size
    scale = max_timestamp(series)
    if scale <= 0:
        scale = 1.0
    value_cols, extra_cols = [], []
    for ch in series.channels:
        sums = np.zeros(grid)
        counts = np.zeros(grid)
        if len(ch.times):
            idx = np.minimum((ch.times / scale * grid).astype(int), grid - 1)
            np.add.at(sums, idx, ch.values)
            np.add.at(counts, idx, 1.0)
        observed = counts > 0
        col = np.zeros(grid)
        col[observed] = sums[observed] / counts[observed]
        if observed.any():
            if cfg.method == "mean":
                col[~observed] = ch.values.mean()
            else:
                occ = np.flatnonzero(observed)
                col = np.interp(np.arange(grid), occ, col[occ])
        value_cols.append(col)
        if cfg.extra == "mask":
            extra_cols.append(observed.astype(np.float64))
        elif cfg.extra == "delta_t":
            pos = np.arange(grid)
            last_occupied = np.maximum.accumulate(np.where(observed, pos, -1))
            extra_cols.append((pos - last_occupied) / grid)
    cols = value_cols + extra_cols
    return np.stack(cols, axis=1)


def impute_dataset(dataset: LabeledDataset, cfg: ImputeConfig) -> list[tuple[np.ndarray, int]]:
    out = []
    for inst in dataset.instances:
        if inst.series.num_observations() == 0:
            raise EmptySeries(f"series {inst.series.id!r} has no observations")
        out.append((impute(inst.series, cfg), inst.label))
    return out


def init_baseline(
    store: ParamStore, cfg: ImputeConfig, num_channels: int, num_classes: int, hidden: int,
    rng: np.random.Generator,
) -> ParamStore:
    init_gru(store, "gru", cfg.step_features * num_channels, hidden, rng)
    init_linear(store, "disc", num_classes, hidden, rng)
    return store


def _forward(grid_feats: np.ndarray, store: ParamStore, hidden: int) -> tuple:
    tape = Tape()
    h = tape.const(np.zeros(hidden))
    for step in grid_feats:
        h = forward_gru_cell(tape, store, "gru", tape.const(step), h)
    logits = forward_linear(tape, store, "disc", h)
    return logits, tape, int(np.argmax(logits.value))


def train_baseline(
    train: LabeledDataset | list,
    val: LabeledDataset | list | None,
    impute_cfg: ImputeConfig,
    tcfg: TrainConfig,
    num_classes: int,
    hidden: int = 64,
    store: ParamStore | None = None,
    log: bool = False,
) -> tuple[ParamStore, RunMetrics]:
    """Train the imputation GRU; same metrics schema as the main model
    (the RL columns are zero, recurrent_steps counts grid_size per
    instance)."""
    train_prep = train if isinstance(train, list) else impute_dataset(train, impute_cfg)
    val_prep = (val if isinstance(val, list) else impute_dataset(val, impute_cfg)) if val is not None else []
    if not train_prep:
        raise ValueError("empty training set")
    num_channels = train_prep[0][0].shape[1] // impute_cfg.step_features
    if store is None:
        rng = np.random.default_rng([tcfg.seed, _tag("init")])
        store = init_baseline(ParamStore(), impute_cfg, num_channels, num_classes, hidden, rng)

    n = len(train_prep)
    metrics = RunMetrics()
    best_acc = -1.0
    best_store = store.clone()
    last_val = 0.0
    for epoch in range(1, tcfg.epochs + 1):
        started = time.perf_counter()
        order = np.random.default_rng([tcfg.seed, _tag("shuffle"), epoch]).permutation(n)
        loss_sum = 0.0
        correct = 0
        for idx in order:
            feats, y = train_prep[idx]
            logits, tape, pred = _forward(feats, store, hidden)
            loss = cross_entropy(logits, y)
            tape.backward(loss)
            adam_step(store, lr=tcfg.lr, weight_decay=tcfg.weight_decay)
            loss_sum += loss.item()
            correct += pred == y
        acc_train = correct / n
        if val_prep and (epoch % tcfg.eval_every == 0 or epoch == tcfg.epochs):
            last_val = evaluate_baseline(val_prep, store, impute_cfg, hidden)
        acc_val = last_val if val_prep else acc_train
        seconds = time.perf_counter() - started
        metrics.rows.append(
            EpochRow(epoch, loss_sum / n, 0.0, 0.0, 0.0, acc_train, acc_val, seconds, n * impute_cfg.grid_size)
        )
        if acc_val > best_acc:
            best_acc = acc_val
            best_store = store.clone()
        if log:
            row = metrics.rows[-1]
            print(
                f"epoch {epoch:3d} loss_s {row.loss_s:.4f} acc_train {row.acc_train:.3f} "
                f"acc_val {row.acc_val:.3f} ({row.seconds:.1f}s)",
                flush=True,
            )
    return best_store, metrics


def evaluate_baseline(
    prepared: LabeledDataset | list, store: ParamStore, impute_cfg: ImputeConfig, hidden: int = 64
) -> float:
    prep = prepared if isinstance(prepared, list) else impute_dataset(prepared, impute_cfg)
    if not prep:
        return 0.0
    correct = 0
    for feats, y in prep:
        _, _, pred = _forward(feats, store, hidden)
        correct += pred == y
    return correct / len(prep)
