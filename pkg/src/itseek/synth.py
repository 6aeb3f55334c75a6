"""Synthetic data: the planted-signal benchmark, the listening probe that
turns a dense regular recording into sparse irregular series, and the
downsampling / rebalancing helpers.

The planted-signal task: each series is standard-normal noise except for
three evenly-spaced points spanning a window of width `signal_width` at a
random location c ~ U[signal_width/2, 1 - signal_width/2]. Class 0 plants
values (1, 1, 1), class 1 plants (1, 0, 1). Noise timestamps avoid the
signal window (the window interior belongs to the signal alone), which is
what makes the local observation density informative; a flag restores the
plain-uniform variant for comparison.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .series import (
    Channel,
    ConfigError,
    DatasetError,
    Instance,
    IrregularSeries,
    LabeledDataset,
    ParseError,
)

__all__ = [
    "MpiConfig",
    "ProbeConfig",
    "TooShort",
    "SingleClass",
    "gen_mpi",
    "find_planted_signal",
    "listening_probe",
    "read_regular_csv",
    "random_downsample",
    "balance_classes",
]

_SIGNAL_VALUES = {0: (1.0, 1.0, 1.0), 1: (1.0, 0.0, 1.0)}


class TooShort(DatasetError):
    pass


class SingleClass(DatasetError):
    pass


def _tag(name: str) -> int:
    return int.from_bytes(name.encode()[:6], "big")


@dataclass(frozen=True)
class MpiConfig:
    n: int = 5000
    series_len: int = 500
    signal_width: float = 0.10
    seed: int = 0
    noise_in_window: bool = False

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be even and >= 2, got {self.n}")
        if self.series_len < 3:
            raise ConfigError(f"series_len must be >= 3, got {self.series_len}")
        if not 0.0 < self.signal_width < 1.0:
            raise ConfigError(f"signal_width must be in (0, 1), got {self.signal_width}")


def gen_mpi(cfg: MpiConfig) -> LabeledDataset:
    """Generate the planted-signal dataset, balanced by alternating labels.

    Each instance draws from its own named rng sub-stream, so generation
    is order-independent and reproducible. Timestamps are strictly
    increasing; exact collisions (measure zero, but possible in floats)
    are nudged apart by 1e-12.
    """
    delta = cfg.signal_width
    instances = []
    for i in range(cfg.n):
        label = i % 2
        rng = np.random.default_rng([cfg.seed, _tag("mpi"), i])
        c = rng.uniform(delta / 2.0, 1.0 - delta / 2.0)
        sig_t = np.array([c - delta / 2.0, c, c + delta / 2.0])
        sig_v = np.array(_SIGNAL_VALUES[label])
        num_noise = cfg.series_len - 3
        if cfg.noise_in_window:
            noise_t = rng.uniform(0.0, 1.0, size=num_noise)
        else:
            u = rng.uniform(0.0, 1.0 - delta, size=num_noise)
            noise_t = np.where(u < c - delta / 2.0, u, u + delta)
        noise_v = rng.standard_normal(num_noise)
        t = np.concatenate([sig_t, noise_t])
        v = np.concatenate([sig_v, noise_v])
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
        while np.any(np.diff(t) <= 0):
            dup = np.flatnonzero(np.diff(t) <= 0)[0] + 1
            t[dup:] += 1e-12
        series = IrregularSeries(f"mpi-{i:05d}", [Channel(t, v)])
        instances.append(Instance(series, label))
    metadata = {
        "name": "mpi",
        "seed": cfg.seed,
        "signal_width": delta,
        "series_len": cfg.series_len,
        "noise_in_window": cfg.noise_in_window,
    }
    return LabeledDataset(instances, 2, metadata)


def find_planted_signal(inst: Instance, signal_width: float, tol: float = 1e-9) -> bool:
    """Scan for the planted triple: values exactly matching the class
    template at three evenly-spaced timestamps spanning signal_width."""
    t, v = inst.series.channels[0]
    template = _SIGNAL_VALUES[inst.label]
    for a in np.flatnonzero(v == template[0]):
        ta = float(t[a])
        mid = int(np.searchsorted(t, ta + signal_width / 2.0 - tol))
        end = int(np.searchsorted(t, ta + signal_width - tol))
        if mid >= len(t) or end >= len(t):
            continue
        if (
            v[mid] == template[1]
            and v[end] == template[2]
            and abs((t[mid] - ta) - signal_width / 2.0) <= tol
            and abs((t[end] - ta) - signal_width) <= tol
        ):
            return True
    return False


@dataclass(frozen=True)
class ProbeConfig:
    gamma: float = 0.001
    window_len: int = 200

    def __post_init__(self):
        # gamma 0 is allowed (keep-everything limit); comparisons are strict
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.window_len < 2:
            raise ConfigError(f"window_len must be >= 2, got {self.window_len}")


def listening_probe(
    times: np.ndarray, records: np.ndarray, cfg: ProbeConfig, id_prefix: str = "probe"
) -> list[tuple[IrregularSeries, float]]:
    """Split a dense regular recording into windows and keep only records
    that differ from their predecessor.

    times is (T,), records is (T, D) with shared timestamps. Windows are
    consecutive non-overlapping stretches of window_len records; the
    trailing remainder is dropped. Within a window, record i is kept iff
    ||records[i] - records[i-1]||_2 > gamma; the first record has no
    predecessor and is never kept. Kept records retain their original
    timestamps (output timestamps are a subset of the input's). Returns
    (series, origin_t0) pairs, origin_t0 being the window's first input
    timestamp (for temporal splits).
    """
    times = np.asarray(times, dtype=np.float64)
    records = np.asarray(records, dtype=np.float64)
    if records.ndim == 1:
        records = records[:, None]
    if len(times) != len(records):
        raise DatasetError(f"{len(times)} timestamps vs {len(records)} records")
    if len(times) < cfg.window_len:
        raise TooShort(f"{len(times)} records, need at least window_len={cfg.window_len}")
    out = []
    num_windows = len(times) // cfg.window_len
    for wi in range(num_windows):
        lo = wi * cfg.window_len
        hi = lo + cfg.window_len
        t, x = times[lo:hi], records[lo:hi]
        diffs = np.linalg.norm(np.diff(x, axis=0), axis=1)
        keep = np.flatnonzero(diffs > cfg.gamma) + 1
        kept_t = t[keep]
        channels = [Channel(kept_t.copy(), x[keep, d].copy()) for d in range(x.shape[1])]
        out.append((IrregularSeries(f"{id_prefix}-{wi:05d}", channels), float(t[0])))
    return out


def read_regular_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read a dense recording: header line, then rows t,ch0[,ch1,...]."""
    times, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        width = len(header)
        if width < 2:
            raise ParseError(1, f"expected a t column plus channels, got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(line_no, f"expected {width} fields, got {len(row)}")
            try:
                values = [float(x) for x in row]
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from exc
            times.append(values[0])
            rows.append(values[1:])
    return np.asarray(times), np.asarray(rows)


def random_downsample(series: IrregularSeries, fraction: float, seed: int, stream: int = 0) -> IrregularSeries:
    """Keep round(fraction * len) observations per channel, uniformly at
    random without replacement, preserving time order. `stream`
    namespaces the draw so one seed covers a whole dataset (one stream
    per instance)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    channels = []
    for d, ch in enumerate(series.channels):
        keep = int(round(fraction * len(ch.times)))
        rng = np.random.default_rng([seed, _tag("down"), stream, d])
        idx = np.sort(rng.choice(len(ch.times), size=keep, replace=False))
        channels.append(Channel(ch.times[idx], ch.values[idx]))
    return IrregularSeries(series.id, channels)


def balance_classes(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Subsample the majority class of a binary dataset to match the
    minority, preserving instance order. Already-balanced input is
    returned unchanged."""
    labels = np.asarray(dataset.labels)
    present = sorted(set(labels.tolist()))
    if len(present) < 2:
        raise SingleClass(f"only label(s) {present} present")
    if len(present) > 2:
        raise DatasetError(f"balance_classes expects binary labels, got {present}")
    counts = {lab: int(np.sum(labels == lab)) for lab in present}
    if counts[present[0]] == counts[present[1]]:
        return dataset
    minority = min(present, key=counts.get)
    majority = max(present, key=counts.get)
    maj_idx = np.flatnonzero(labels == majority)
    rng = np.random.default_rng([seed, _tag("bal")])
    keep_maj = set(rng.choice(maj_idx, size=counts[minority], replace=False).tolist())
    instances = [
        inst
        for i, inst in enumerate(dataset.instances)
        if labels[i] == minority or i in keep_maj
    ]
    return LabeledDataset(instances, dataset.num_classes, dict(dataset.metadata))
