"""Joint training loop: supervised loss on the discriminator plus a
score-function loss on the moment policy, with a learned return baseline.

Per episode, with prediction yhat and label y:

    r = +1 if yhat == y else -1
    R = (K - 1) * r                      (the terminal reward, replicated
                                          over the K-1 moment choices)
    L_s  = -log softmax(logits)[y]
    L_rl = -sum_i logpi_i * sum_{j>=i} (R - b_j)
    L_b  = mean_j (b_j - R)^2

Advantages are plain numbers: no gradient flows from L_rl into the
baseline or through the reward. The baseline and the policy both read
detached hidden states, so the three losses partition the parameters:
L_s trains encoder, GRU, and discriminator; L_rl trains the policy head;
L_b trains the baseline net. The core treats the hidden state as the
policy's observation, not as something to optimize for reward.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, ParamStore, adam_step
from .features import PreparedSeries, ReceptorConfig, extract_features, feature_scale, prepare_series
from .model import AgentConfig, EpisodeTrace, init_agent, run_episode
from .series import LabeledDataset

__all__ = [
    "TrainConfig",
    "NoActions",
    "cross_entropy",
    "episode_reward",
    "reinforce_loss",
    "baseline_loss",
    "StepStats",
    "joint_step",
    "EpochRow",
    "RunMetrics",
    "fit",
    "evaluate",
    "prepare_instances",
    "METRICS_COLUMNS",
]

METRICS_COLUMNS = [
    "epoch",
    "loss_s",
    "loss_rl",
    "loss_b",
    "reward",
    "acc_train",
    "acc_val",
    "seconds",
    "recurrent_steps",
]


class NoActions(ValueError):
    """Raised when an RL loss is requested for an episode with no actions."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 200
    batch_size: int = 1
    seed: int = 0
    eval_every: int = 1
    target_acc: float | None = None
    patience: int | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.target_acc is not None and not 0.0 < self.target_acc <= 1.0:
            raise ValueError(f"target_acc must lie in (0, 1], got {self.target_acc}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


def cross_entropy(logits: Node, y: int) -> Node:
    """-log softmax(logits)[y], a non-negative scalar node."""
    num = logits.value.shape[0]
    if not 0 <= y < num:
        raise ValueError(f"label {y} outside [0, {num})")
    onehot = np.zeros(num)
    onehot[y] = 1.0
    return -(logits.softmax().log() * onehot).sum()


def episode_reward(trace: EpisodeTrace, y: int) -> tuple[float, float]:
    """(r, R): the terminal +-1 reward and its replication over actions."""
    r = 1.0 if trace.pred == y else -1.0
    return r, r * trace.num_actions


def reinforce_loss(trace: EpisodeTrace, total_return: float) -> Node:
    """Score-function surrogate with per-action suffix advantages.

    Advantage for action i is sum_{j>=i} (R - b_j) over the later baseline
    predictions, entering as a constant.
    """
    if trace.num_actions == 0:
        raise NoActions("episode has no moment choices")
    b_vals = [b.item() for b in trace.baseline_nodes]
    loss = None
    suffix = 0.0
    for logpi, b in zip(reversed(trace.logpi_nodes), reversed(b_vals)):
        suffix += total_return - b
        term = logpi * suffix
        loss = term if loss is None else loss + term
    return -loss


def baseline_loss(trace: EpisodeTrace, total_return: float) -> Node:
    """Mean squared error of the baseline predictions against the return."""
    if trace.num_actions == 0:
        raise NoActions("episode has no moment choices")
    loss = None
    for b in trace.baseline_nodes:
        err = b - total_return
        sq = err * err
        loss = sq if loss is None else loss + sq
    return loss * (1.0 / trace.num_actions)


@dataclass(frozen=True)
class StepStats:
    loss_s: float
    loss_rl: float
    loss_b: float
    reward: float
    correct: bool


def joint_step(
    prepared: PreparedSeries,
    y: int,
    store: ParamStore,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    rng: np.random.Generator,
    random_moments: bool = False,
    apply_update: bool = True,
    loss_scale: float = 1.0,
) -> StepStats:
    """One stochastic episode, backward pass, and (optionally) Adam step.

    With random_moments the moment sequence is uniform noise and only the
    supervised loss trains (the ablated variant: policy and baseline
    parameters receive no gradient). loss_scale averages gradients across
    a mini-batch when the caller defers the update.
    """
    override = list(rng.uniform(size=acfg.K)) if random_moments else None
    trace, tape = run_episode(prepared, store, rcfg, acfg, mode="stochastic", rng=rng, moments_override=override)
    loss_s = cross_entropy(trace.logits_node, y)
    r, total_return = episode_reward(trace, y)
    if trace.num_actions > 0:
        loss_rl = reinforce_loss(trace, total_return)
        loss_b = baseline_loss(trace, total_return)
        total = loss_s + loss_rl + loss_b
        rl_val, b_val = loss_rl.item(), loss_b.item()
    else:
        total = loss_s
        rl_val, b_val = 0.0, 0.0
    if loss_scale != 1.0:
        total = total * loss_scale
    tape.backward(total)
    if apply_update:
        adam_step(store, lr=tcfg.lr, weight_decay=tcfg.weight_decay)
    return StepStats(loss_s.item(), rl_val, b_val, r, trace.pred == y)


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    loss_s: float
    loss_rl: float
    loss_b: float
    reward: float
    acc_train: float
    acc_val: float
    seconds: float
    recurrent_steps: int


@dataclass
class RunMetrics:
    rows: list[EpochRow] = field(default_factory=list)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for row in self.rows:
                writer.writerow([getattr(row, col) for col in METRICS_COLUMNS])

    def best_val(self) -> float:
        return max((row.acc_val for row in self.rows), default=0.0)


def prepare_instances(dataset: LabeledDataset, rcfg: ReceptorConfig) -> list[tuple[PreparedSeries, int]]:
    return [(prepare_series(inst.series, rcfg), inst.label) for inst in dataset.instances]


def evaluate(
    prepared: list[tuple[PreparedSeries, int]],
    store: ParamStore,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    random_moments: bool = False,
    seed: int = 0,
) -> float:
    """Accuracy with the deterministic policy (or, for the ablated model,
    a seeded random moment sequence)."""
    if not prepared:
        return 0.0
    correct = 0
    rng = np.random.default_rng([seed, _tag("evalmoments")]) if random_moments else None
    for prep, y in prepared:
        override = list(rng.uniform(size=acfg.K)) if random_moments else None
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic", moments_override=override)
        correct += trace.pred == y
    return correct / len(prepared)


def _tag(name: str) -> int:
    """Stable integer for seeding named rng sub-streams."""
    return int.from_bytes(name.encode()[:6], "big")


def fit(
    train: LabeledDataset | list,
    val: LabeledDataset | list | None,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    tcfg: TrainConfig,
    store: ParamStore | None = None,
    random_moments: bool = False,
    log: bool = False,
) -> tuple[ParamStore, RunMetrics]:
    """Train for tcfg.epochs epochs and return the best parameters.

    All randomness flows from tcfg.seed through named sub-streams
    (initialization, per-epoch shuffling, per-episode noise), so a fixed
    seed reproduces every number except wall-clock seconds. Checkpoint
    selection uses val accuracy; with no val split it falls back to the
    epoch's on-policy train accuracy, which is also what the acc_val
    column then reports.

    Training stops before tcfg.epochs when acc_val reaches tcfg.target_acc
    or fails to improve for tcfg.patience evaluations (when set).
    """
    train_prep = train if isinstance(train, list) else prepare_instances(train, rcfg)
    if val is None:
        val_prep = []
    else:
        val_prep = val if isinstance(val, list) else prepare_instances(val, rcfg)
    if not train_prep:
        raise ValueError("empty training set")
    num_channels = len(train_prep[0][0].channels)

    if store is None:
        samples = [
            extract_features(prep, m, rcfg)
            for prep, _ in train_prep[:64]
            for m in ((np.arange(8) + 0.5) / 8.0)
        ]
        store = init_agent(
            ParamStore(), rcfg, acfg, num_channels,
            np.random.default_rng([tcfg.seed, _tag("init")]),
            column_scale=feature_scale(samples),
        )

    n = len(train_prep)
    metrics = RunMetrics()
    best_acc = -1.0
    best_store = store.clone()
    last_val = 0.0
    stale = 0
    for epoch in range(1, tcfg.epochs + 1):
        started = time.perf_counter()
        order = np.random.default_rng([tcfg.seed, _tag("shuffle"), epoch]).permutation(n)
        sums = np.zeros(4)
        correct = 0
        scale = 1.0 / tcfg.batch_size
        for pos, idx in enumerate(order):
            prep, y = train_prep[idx]
            rng = np.random.default_rng([tcfg.seed, _tag("episode"), epoch, int(idx)])
            last_in_batch = (pos + 1) % tcfg.batch_size == 0 or pos == n - 1
            stats = joint_step(
                prep, y, store, rcfg, acfg, tcfg, rng,
                random_moments=random_moments,
                apply_update=last_in_batch,
                loss_scale=scale if tcfg.batch_size > 1 else 1.0,
            )
            sums += (stats.loss_s, stats.loss_rl, stats.loss_b, stats.reward)
            correct += stats.correct
        acc_train = correct / n
        if val_prep and (epoch % tcfg.eval_every == 0 or epoch == tcfg.epochs):
            last_val = evaluate(val_prep, store, rcfg, acfg, random_moments=random_moments, seed=tcfg.seed)
        acc_val = last_val if val_prep else acc_train
        seconds = time.perf_counter() - started
        means = [float(s) for s in sums / n]
        metrics.rows.append(
            EpochRow(epoch, means[0], means[1], means[2], means[3], acc_train, acc_val, seconds, n * acfg.K)
        )
        if acc_val > best_acc:
            best_acc = acc_val
            best_store = store.clone()
            stale = 0
        else:
            stale += 1
        if log:
            row = metrics.rows[-1]
            print(
                f"epoch {epoch:3d} loss_s {row.loss_s:.4f} loss_rl {row.loss_rl:+.4f} "
                f"reward {row.reward:+.3f} acc_train {row.acc_train:.3f} acc_val {row.acc_val:.3f} "
                f"({row.seconds:.1f}s)",
                flush=True,
            )
        if tcfg.target_acc is not None and acc_val >= tcfg.target_acc:
            break
        if tcfg.patience is not None and stale >= tcfg.patience:
            break
    return best_store, metrics
