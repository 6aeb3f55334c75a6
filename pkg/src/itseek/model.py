"""The classifier agent: a moment policy steering a local receptor, a GRU
aggregating the readings, and a discriminator on the final state.

An episode makes K readings. Reading i extracts features at moment m_i,
encodes them, and updates the hidden state. After each non-final reading
the policy head proposes the next moment: mu = sigmoid(w h + b), with the
actual moment sampled from N(mu, sigma^2) and clamped to [0, 1]
(stochastic mode) or taken as mu (deterministic mode). The log-density of
the pre-clamp sample is kept on the tape for the score-function gradient.
The policy and the small MLP return baseline both read detached copies of
the hidden state: reward maximization trains the policy head alone, and
the baseline's regression error never reaches the core network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Node,
    ParamStore,
    Tape,
    forward_gru_cell,
    forward_linear,
    forward_mlp2,
    init_gru,
    init_linear,
    init_mlp2,
)
from .features import PreparedSeries, ReceptorConfig, encode, extract_features, init_encoder

__all__ = [
    "AgentConfig",
    "EpisodeTrace",
    "init_agent",
    "transition_step",
    "moment_policy",
    "baseline_predict",
    "discriminate",
    "run_episode",
    "BASELINE_HIDDEN",
]

BASELINE_HIDDEN = 64
_LOG_SQRT_2PI = 0.5 * float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class AgentConfig:
    num_classes: int
    K: int = 3
    H: int = 64
    sigma: float = 0.05

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.H < 1:
            raise ValueError(f"H must be >= 1, got {self.H}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass
class EpisodeTrace:
    """Everything one episode produced that the losses need."""

    moments: list[float]
    means: list[float]
    samples: list[float]
    hiddens: list[np.ndarray]
    logpi_nodes: list[Node]
    baseline_nodes: list[Node]
    logits_node: Node
    probs: np.ndarray
    pred: int

    @property
    def num_actions(self) -> int:
        return len(self.logpi_nodes)


def init_agent(
    store: ParamStore,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    num_channels: int,
    rng: np.random.Generator,
    column_scale: np.ndarray | None = None,
) -> ParamStore:
    """Glorot-initialized parameters for every component, zero biases.

    column_scale (per-feature inverse RMS, see features.feature_scale)
    rescales the initial encoder columns so wildly different feature
    magnitudes do not saturate the recurrent gates at step one.
    """
    init_encoder(store, rcfg, num_channels, rng, column_scale)
    init_gru(store, "gru", rcfg.L + 1, acfg.H, rng)
    init_linear(store, "policy", 1, acfg.H, rng)
    init_mlp2(store, "baseline", acfg.H, BASELINE_HIDDEN, 1, rng)
    init_linear(store, "disc", acfg.num_classes, acfg.H, rng)
    return store


def transition_step(tape: Tape, store: ParamStore, x: Node, h: Node) -> Node:
    return forward_gru_cell(tape, store, "gru", x, h)


def moment_policy(
    tape: Tape,
    store: ParamStore,
    h: Node,
    sigma: float,
    mode: str,
    rng: np.random.Generator | None,
    frozen_u: float | None = None,
) -> tuple[float, Node, float, float]:
    """Propose the next moment from the current hidden state.

    Returns (moment, logpi_node, mean, pre_clamp_sample). The moment is
    the clamped sample (stochastic) or the mean itself (deterministic);
    the log-density is evaluated at the pre-clamp sample so the score
    function matches the distribution actually sampled from. frozen_u
    replays a recorded pre-clamp sample instead of drawing one, so a
    stochastic episode can be rebuilt bit-for-bit under perturbed
    parameters (gradient checks).

    The hidden state enters as a detached observation: the policy head is
    the only parameter group the score-function loss trains. The core is
    shaped by classification alone, which keeps the high-variance
    REINFORCE signal out of the encoder and recurrent weights.
    """
    mu_node = forward_linear(tape, store, "policy", tape.const(h.value)).sigmoid()
    mu = mu_node.item()
    if frozen_u is not None:
        u = float(frozen_u)
        m = min(max(u, 0.0), 1.0)
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        u = float(rng.normal(mu, sigma))
        m = min(max(u, 0.0), 1.0)
    elif mode == "deterministic":
        u = mu
        m = mu
    else:
        raise ValueError(f"unknown mode {mode!r}")
    diff = mu_node - u
    logpi = (diff * diff * (-1.0 / (2.0 * sigma * sigma))).sum() - (np.log(sigma) + _LOG_SQRT_2PI)
    return m, logpi, mu, u


def baseline_predict(tape: Tape, store: ParamStore, h_value: np.ndarray) -> Node:
    """Return estimate from a detached hidden state (a plain array)."""
    return forward_mlp2(tape, store, "baseline", tape.const(h_value)).sum()


def discriminate(tape: Tape, store: ParamStore, h: Node) -> tuple[Node, np.ndarray, int]:
    """Class logits from the final hidden state, plus probabilities and
    the argmax prediction (computed off-tape)."""
    logits = forward_linear(tape, store, "disc", h)
    shifted = logits.value - logits.value.max()
    e = np.exp(shifted)
    probs = e / e.sum()
    return logits, probs, int(np.argmax(logits.value))


def run_episode(
    prepared: PreparedSeries,
    store: ParamStore,
    rcfg: ReceptorConfig,
    acfg: AgentConfig,
    mode: str = "stochastic",
    rng: np.random.Generator | None = None,
    moments_override: list[float] | None = None,
    samples_override: list[float] | None = None,
    tape: Tape | None = None,
) -> tuple[EpisodeTrace, Tape]:
    """Run one K-reading episode and return its trace and tape.

    moments_override pins the full moment sequence and skips the policy
    and baseline entirely (the random-moment ablation, and supervised
    gradient checks where the loss must be differentiable at a frozen
    moment path). samples_override instead pins m_0 and the K-1 pre-clamp
    samples u while keeping the policy and baseline on the tape: an
    episode with frozen randomness, which is what the RL-loss gradient
    checks differentiate. Otherwise m_0 is uniform on [0, 1) (stochastic)
    or 0.5 (deterministic).
    """
    if tape is None:
        tape = Tape()
    if moments_override is not None:
        if len(moments_override) != acfg.K:
            raise ValueError(f"moments_override has {len(moments_override)} entries, need K={acfg.K}")
        m = float(moments_override[0])
    elif samples_override is not None:
        if len(samples_override) != acfg.K:
            raise ValueError(f"samples_override has {len(samples_override)} entries, need K={acfg.K}")
        m = float(samples_override[0])
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        m = float(rng.uniform())
    else:
        m = 0.5

    trace = EpisodeTrace(
        moments=[], means=[], samples=[], hiddens=[], logpi_nodes=[], baseline_nodes=[],
        logits_node=None, probs=None, pred=-1,
    )
    h = tape.const(np.zeros(acfg.H))
    for i in range(acfg.K):
        trace.moments.append(m)
        x = encode(tape, store, extract_features(prepared, m, rcfg), m)
        h = transition_step(tape, store, x, h)
        trace.hiddens.append(h.value)
        if i < acfg.K - 1:
            if moments_override is not None:
                m = float(moments_override[i + 1])
            else:
                frozen_u = samples_override[i + 1] if samples_override is not None else None
                m, logpi, mu, u = moment_policy(tape, store, h, acfg.sigma, mode, rng, frozen_u)
                trace.means.append(mu)
                trace.samples.append(u)
                trace.logpi_nodes.append(logpi)
                trace.baseline_nodes.append(baseline_predict(tape, store, h.value))

    logits, probs, pred = discriminate(tape, store, h)
    trace.logits_node = logits
    trace.probs = probs
    trace.pred = pred
    return trace, tape
