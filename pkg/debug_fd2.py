"""Bisect which loss pairing breaks the FD check."""
import numpy as np

from itseek.autodiff import ParamStore, finite_diff_check
from itseek.features import ReceptorConfig, prepare_series
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import baseline_loss, cross_entropy, episode_reward

rng = np.random.default_rng(7)
rcfg = ReceptorConfig(delta=0.1, w=4, L=8)
acfg = AgentConfig(num_classes=2, K=3, H=8, sigma=0.05)

ds = gen_mpi(MpiConfig(n=2, series_len=40, signal_width=0.1, seed=3))
inst = ds.instances[0]
prep = prepare_series(inst.series, rcfg)
y = inst.label

store = ParamStore()
init_agent(store, rcfg, acfg, num_channels=len(inst.series.channels), rng=rng)
for name in store.names():
    p = store[name]
    p.value += rng.normal(0.0, 0.05, size=p.value.shape)

trace, _ = run_episode(prep, store, rcfg, acfg, mode="stochastic", rng=np.random.default_rng(11))
frozen = [trace.moments[0]] + list(trace.samples)
r, R = episode_reward(trace, y)
b_vals = [b.item() for b in trace.baseline_nodes]
advs = []
suffix = 0.0
for b in reversed(b_vals):
    suffix += R - b
    advs.append(suffix)
advs = list(reversed(advs))


def build(s, want_ce, want_rl, want_b):
    tr, tape = run_episode(prep, s, rcfg, acfg, mode="stochastic", rng=None, samples_override=frozen)
    parts = []
    if want_ce:
        parts.append(cross_entropy(tr.logits_node, y))
    if want_rl:
        for logpi, adv in zip(tr.logpi_nodes, advs):
            parts.append(logpi * (-adv))
    if want_b:
        parts.append(baseline_loss(tr, R))
    loss = parts[0]
    for p in parts[1:]:
        loss = loss + p
    return loss


combos = [
    ("baseline-only", (0, 0, 1)),
    ("ce+rl", (1, 1, 0)),
    ("ce+baseline", (1, 0, 1)),
    ("rl+baseline", (0, 1, 1)),
    ("joint", (1, 1, 1)),
]
for label, (a, b, c) in combos:
    rep = finite_diff_check(lambda s, a=a, b=b, c=c: build(s, a, b, c), store, tol_rel=2e-4, step=1e-6)
    print(f"{label:>14s}: {rep.summary()}")
    if not rep.passed:
        for e in rep.failures[:4]:
            print(f"      {e.param}[{e.index}] g_ad={e.g_ad:+.8e} g_fd={e.g_fd:+.8e} rel={e.rel_err:.3g}")
