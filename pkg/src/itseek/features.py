"""Local receptor: turns a moment on the normalized timeline into a
fixed-size feature vector, and encodes it for the recurrent core.

For a moment m and window width delta, queries live on the grid
t'_j = m - delta/2 + j*delta/w for j = 1..w. Each query yields an
interpolated value p_j (linear between the nearest in-window neighbors,
exact at observed timestamps, flattened to the nearest observation past
the window's content, zero if the window is empty) and an observation
density q_j = sum_k exp(-alpha * (t'_j - tau_k)^2) over in-window
timestamps. A second, coarse block uses the same machinery over the whole
normalized timeline, so one reading carries both a magnified local view
and global context. Per channel the blocks are laid out
[p_fine, q_fine, p_coarse, q_coarse]; channels are concatenated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Node, ParamStore, Tape, concat, init_linear, forward_linear
from .series import Channel, EmptySeries, IrregularSeries, max_timestamp, window_arrays

__all__ = [
    "ReceptorConfig",
    "PreparedSeries",
    "query_grid",
    "interpolate_values",
    "density_features",
    "prepare_series",
    "extract_features",
    "init_encoder",
    "encode",
    "feature_dim",
]


@dataclass(frozen=True)
class ReceptorConfig:
    delta: float
    w: int = 50
    alpha: float = 100.0
    L: int = 50
    use_density: bool = True
    coarse_width: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.w < 2:
            raise ValueError(f"w must be >= 2, got {self.w}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if not 0.0 < self.coarse_width <= 1.0:
            raise ValueError(f"coarse_width must be in (0, 1], got {self.coarse_width}")


def query_grid(center: float, width: float, w: int) -> np.ndarray:
    """Query timestamps t'_j = center - width/2 + j*width/w, j = 1..w."""
    return center - width / 2.0 + np.arange(1, w + 1) * (width / w)


def interpolate_values(times: np.ndarray, values: np.ndarray, center: float, width: float, w: int) -> np.ndarray:
    """Linear interpolation of in-window observations at the query grid."""
    tw, vw = window_arrays(times, values, center, width)
    if len(tw) == 0:
        return np.zeros(w)
    return np.interp(query_grid(center, width, w), tw, vw)


def density_features(times: np.ndarray, center: float, width: float, w: int, alpha: float) -> np.ndarray:
    """Squared-exponential observation density at the query grid."""
    tw = window_arrays(times, np.empty_like(times), center, width).times
    grid = query_grid(center, width, w)
    if len(tw) == 0:
        return np.zeros(w)
    d = grid[:, None] - tw[None, :]
    return np.exp(-alpha * d * d).sum(axis=1)


@dataclass(frozen=True)
class PreparedSeries:
    """A series with timestamps normalized to [0, 1] and the coarse
    feature blocks (which do not depend on the moment) precomputed."""

    id: str
    channels: list[Channel]
    max_t: float
    coarse: list[np.ndarray]


def _coarse_blocks(channels: list[Channel], cfg: ReceptorConfig) -> list[np.ndarray]:
    center = 0.5
    blocks = []
    for ch in channels:
        p = interpolate_values(ch.times, ch.values, center, cfg.coarse_width, cfg.w)
        if cfg.use_density:
            q = density_features(ch.times, center, cfg.coarse_width, cfg.w, cfg.alpha)
        else:
            q = np.zeros(cfg.w)
        blocks.append(np.concatenate([p, q]))
    return blocks


def prepare_series(series: IrregularSeries, cfg: ReceptorConfig) -> PreparedSeries:
    """Normalize timestamps by the series maximum and cache coarse blocks."""
    max_t = max_timestamp(series)
    scale = max_t if max_t > 0 else 1.0
    channels = [Channel(ch.times / scale, ch.values) for ch in series.channels]
    return PreparedSeries(series.id, channels, max_t, _coarse_blocks(channels, cfg))


def feature_dim(cfg: ReceptorConfig, num_channels: int) -> int:
    return 4 * cfg.w * num_channels


def extract_features(series: IrregularSeries | PreparedSeries, m: float, cfg: ReceptorConfig) -> np.ndarray:
    """Feature vector of length 4*w*D for a receptor centered at moment m.

    Accepts a PreparedSeries (fast path, cached coarse blocks) or a raw
    IrregularSeries (normalized on the fly).
    """
    if not isinstance(series, PreparedSeries):
        series = prepare_series(series, cfg)
    parts = []
    for ch, coarse in zip(series.channels, series.coarse):
        p = interpolate_values(ch.times, ch.values, m, cfg.delta, cfg.w)
        if cfg.use_density:
            q = density_features(ch.times, m, cfg.delta, cfg.w, cfg.alpha)
        else:
            q = np.zeros(cfg.w)
        parts.append(p)
        parts.append(q)
        parts.append(coarse)
    return np.concatenate(parts)


def feature_scale(samples: list[np.ndarray], floor: float = 1e-2) -> np.ndarray:
    """Per-dimension inverse RMS over sample feature vectors.

    Density sums run one to two orders of magnitude above interpolated
    values (they grow with the observation count), which leaves a plain
    Glorot encoder saturating every recurrent gate at initialization:
    derivatives underflow to zero and nothing downstream can train.
    Folding this scale into the initial encoder columns equalizes the
    blocks while keeping the feature and encoding definitions untouched.
    """
    stacked = np.stack(samples)
    rms = np.sqrt(np.mean(stacked * stacked, axis=0))
    return 1.0 / np.maximum(rms, floor)


def init_encoder(
    store: ParamStore,
    cfg: ReceptorConfig,
    num_channels: int,
    rng: np.random.Generator,
    column_scale: np.ndarray | None = None,
) -> None:
    init_linear(store, "enc", cfg.L, feature_dim(cfg, num_channels), rng)
    if column_scale is not None:
        w = store["enc.W"]
        if column_scale.shape != (w.value.shape[1],):
            raise ValueError(f"column_scale shape {column_scale.shape} does not match {w.value.shape[1]} features")
        w.value *= column_scale[None, :]


def encode(tape: Tape, store: ParamStore, features: np.ndarray, m: float) -> Node:
    """relu(W f + b) with the moment appended, an (L+1)-vector node.

    The moment enters as a constant: the reading is conditioned on where
    the receptor sits, but no gradient flows into the policy through this
    path.
    """
    x = tape.const(features)
    hidden = forward_linear(tape, store, "enc", x).relu()
    return concat([hidden, tape.const(np.array([m]))])
