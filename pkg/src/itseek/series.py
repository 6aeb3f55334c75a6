"""Core data model and file I/O for labeled irregular time series.

A series holds one (timestamps, values) pair of arrays per channel.
Channels are independent: they may have different lengths, and a channel
may be empty. Timestamps are raw (whatever unit the source used, seconds
or normalized); model code normalizes them per series before use.

Datasets are stored as JSON lines: line 1 is a metadata object, every
following line is one instance. Floats survive the round trip bit-exactly
because json serializes them via repr.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "Channel",
    "IrregularSeries",
    "Instance",
    "LabeledDataset",
    "SplitSpec",
    "DatasetError",
    "ConfigError",
    "UnsortedTimestamps",
    "NonFiniteValue",
    "NegativeTimestamp",
    "EmptySeries",
    "ParseError",
    "SchemaError",
    "EmptyPartition",
    "series_from_pairs",
    "validate",
    "max_timestamp",
    "window",
    "window_arrays",
    "read_dataset",
    "write_dataset",
    "split",
]


class DatasetError(ValueError):
    """Base class for all data-model violations."""


class ConfigError(ValueError):
    """An invalid or unknown configuration value (shared across modules)."""


class UnsortedTimestamps(DatasetError):
    pass


class NonFiniteValue(DatasetError):
    pass


class NegativeTimestamp(DatasetError):
    pass


class EmptySeries(DatasetError):
    pass


class ParseError(DatasetError):
    """A dataset file line is not valid JSON. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(DatasetError):
    """A dataset file parses as JSON but violates the dataset schema."""


class EmptyPartition(DatasetError):
    pass


class Channel(NamedTuple):
    """One channel: parallel float64 arrays of timestamps and values."""

    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class IrregularSeries:
    """A multichannel irregularly-sampled series.

    Instances are treated as immutable after construction; nothing in this
    package mutates the arrays, which makes sharing across worker processes
    safe.
    """

    id: str
    channels: list[Channel]

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def num_observations(self) -> int:
        return sum(len(ch.times) for ch in self.channels)


@dataclass(frozen=True)
class Instance:
    series: IrregularSeries
    label: int
    origin_t0: float | None = None


@dataclass(frozen=True)
class LabeledDataset:
    instances: list[Instance]
    num_classes: int
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    @property
    def labels(self) -> list[int]:
        return [inst.label for inst in self.instances]


def series_from_pairs(series_id: str, vars_pairs: list[list[tuple[float, float]]]) -> IrregularSeries:
    """Build a series from per-channel lists of (t, v) pairs."""
    channels = []
    for pairs in vars_pairs:
        if pairs:
            arr = np.asarray(pairs, dtype=np.float64).reshape(len(pairs), 2)
            channels.append(Channel(arr[:, 0].copy(), arr[:, 1].copy()))
        else:
            channels.append(Channel(np.empty(0), np.empty(0)))
    return IrregularSeries(series_id, channels)


def validate(series: IrregularSeries) -> None:
    """Check the series invariants; raise a specific DatasetError on violation.

    Invariants: at least one channel; all timestamps and values finite;
    timestamps non-negative and strictly increasing within each channel.
    Empty channels are allowed.
    """
    if series.num_channels < 1:
        raise EmptySeries(f"series {series.id!r} has no channels")
    for d, ch in enumerate(series.channels):
        t, v = ch.times, ch.values
        if len(t) != len(v):
            raise SchemaError(f"series {series.id!r} channel {d}: {len(t)} timestamps vs {len(v)} values")
        if len(t) == 0:
            continue
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise NonFiniteValue(f"series {series.id!r} channel {d} contains a non-finite entry")
        if t[0] < 0:
            raise NegativeTimestamp(f"series {series.id!r} channel {d} starts at t={t[0]}")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise UnsortedTimestamps(f"series {series.id!r} channel {d} timestamps not strictly increasing")


def max_timestamp(series: IrregularSeries) -> float:
    """Largest timestamp across channels; EmptySeries if every channel is empty."""
    last = [ch.times[-1] for ch in series.channels if len(ch.times)]
    if not last:
        raise EmptySeries(f"series {series.id!r} has no observations")
    return float(max(last))


def window_arrays(times: np.ndarray, values: np.ndarray, center: float, width: float) -> Channel:
    """Observations with center - width/2 <= t <= center + width/2 (both ends closed).

    Returns views into the input arrays; callers must not mutate them.
    """
    if width <= 0:
        raise ValueError(f"window width must be positive, got {width}")
    lo = np.searchsorted(times, center - width / 2.0, side="left")
    hi = np.searchsorted(times, center + width / 2.0, side="right")
    return Channel(times[lo:hi], values[lo:hi])


def window(series: IrregularSeries, center: float, width: float) -> list[Channel]:
    """Per-channel closed-interval window around center."""
    return [window_arrays(ch.times, ch.values, center, width) for ch in series.channels]


def _channel_to_json(ch: Channel) -> list[list[float]]:
    return [[float(t), float(v)] for t, v in zip(ch.times, ch.values)]


def write_dataset(dataset: LabeledDataset, path: str) -> None:
    """Write JSON lines: metadata line, then one instance per line."""
    meta = dict(dataset.metadata)
    d = dataset.instances[0].series.num_channels if dataset.instances else int(meta.get("d", 0))
    header = {
        "name": meta.pop("name", ""),
        "n": len(dataset.instances),
        "d": d,
        "num_classes": dataset.num_classes,
        "seed": meta.pop("seed", None),
    }
    header.update(meta)
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for inst in dataset.instances:
            row = {"id": inst.series.id, "label": inst.label}
            if inst.origin_t0 is not None:
                row["origin_t0"] = inst.origin_t0
            row["vars"] = [_channel_to_json(ch) for ch in inst.series.channels]
            fh.write(json.dumps(row) + "\n")


def read_dataset(path: str) -> LabeledDataset:
    """Read a dataset written by write_dataset, validating every instance.

    Raises ParseError (with line number) on malformed JSON, SchemaError on
    missing fields, out-of-range labels, duplicate ids, or channel-count
    mismatches, and the series-level errors from validate().
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file, expected a metadata line")

    def parse_line(i: int) -> dict:
        try:
            obj = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise ParseError(i + 1, str(exc)) from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"line {i + 1}: expected a JSON object")
        return obj

    header = parse_line(0)
    for key in ("name", "n", "d", "num_classes", "seed"):
        if key not in header:
            raise SchemaError(f"metadata line is missing {key!r}")
    num_classes = int(header["num_classes"])
    expect_n, expect_d = int(header["n"]), int(header["d"])

    instances: list[Instance] = []
    seen_ids: set[str] = set()
    for i in range(1, len(lines)):
        if not lines[i].strip():
            continue
        row = parse_line(i)
        for key in ("id", "label", "vars"):
            if key not in row:
                raise SchemaError(f"line {i + 1}: instance is missing {key!r}")
        sid = str(row["id"])
        if sid in seen_ids:
            raise SchemaError(f"line {i + 1}: duplicate id {sid!r}")
        seen_ids.add(sid)
        label = int(row["label"])
        if not 0 <= label < num_classes:
            raise SchemaError(f"line {i + 1}: label {label} outside [0, {num_classes})")
        series = series_from_pairs(sid, row["vars"])
        if series.num_channels != expect_d:
            raise SchemaError(f"line {i + 1}: {series.num_channels} channels, metadata says {expect_d}")
        try:
            validate(series)
        except DatasetError as exc:
            raise SchemaError(f"line {i + 1}: {exc}") from exc
        origin = row.get("origin_t0")
        instances.append(Instance(series, label, None if origin is None else float(origin)))

    if len(instances) != expect_n:
        raise SchemaError(f"{len(instances)} instances, metadata says {expect_n}")
    metadata = {k: v for k, v in header.items() if k not in ("n", "d", "num_classes")}
    return LabeledDataset(instances, num_classes, metadata)


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0
    mode: str = "random"

    def __post_init__(self):
        for name in ("train", "val", "test"):
            frac = getattr(self, name)
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"{name} fraction {frac} outside [0, 1]")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.mode not in ("random", "temporal"):
            raise ValueError(f"unknown split mode {self.mode!r}")


def split(dataset: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Partition into train/val/test.

    random mode shuffles with the spec seed; temporal mode orders instances
    by origin_t0 and cuts contiguously, so the test partition is strictly
    later than train. Sizes are round(frac * n) for train and val with the
    remainder going to test; EmptyPartition if a positive fraction yields
    zero instances.
    """
    n = len(dataset)
    if n == 0:
        raise DatasetError("cannot split an empty dataset")
    n_train = int(round(spec.train * n))
    n_val = int(round(spec.val * n))
    if n_train + n_val > n:
        n_val = n - n_train
    n_test = n - n_train - n_val
    for name, frac, size in (("train", spec.train, n_train), ("val", spec.val, n_val), ("test", spec.test, n_test)):
        if frac > 0 and size == 0:
            raise EmptyPartition(f"{name} fraction {frac} yields zero of {n} instances")

    if spec.mode == "random":
        order = np.random.default_rng(spec.seed).permutation(n)
    else:
        origins = []
        for inst in dataset.instances:
            if inst.origin_t0 is None:
                raise DatasetError(f"temporal split needs origin_t0 on every instance ({inst.series.id!r} lacks it)")
            origins.append(inst.origin_t0)
        order = np.argsort(np.asarray(origins), kind="stable")

    def take(idx: np.ndarray) -> LabeledDataset:
        return LabeledDataset([dataset.instances[i] for i in idx], dataset.num_classes, dict(dataset.metadata))

    return (
        take(order[:n_train]),
        take(order[n_train : n_train + n_val]),
        take(order[n_train + n_val :]),
    )
