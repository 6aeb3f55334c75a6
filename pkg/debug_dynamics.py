"""Compare training internals at delta=0.1 vs 0.2, centered moments."""
import sys

import numpy as np

from itseek.autodiff import ParamStore, adam_step
from itseek.features import ReceptorConfig, extract_features, feature_scale, prepare_series
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import cross_entropy

SIG = 0.10
ds = gen_mpi(MpiConfig(n=400, series_len=500, signal_width=SIG, seed=5))

def center(inst):
    ch = inst.series.channels[0]
    vals, times = ch.values, ch.times
    for i in range(len(times) - 2):
        if abs(vals[i] - 1.0) < 1e-9 and abs(vals[i + 2] - 1.0) < 1e-9:
            d1, d2 = times[i + 1] - times[i], times[i + 2] - times[i + 1]
            if abs(d1 - SIG / 2) < 1e-9 and abs(d2 - SIG / 2) < 1e-9:
                return times[i + 1] / times[-1]
    raise AssertionError

for delta in (0.10, 0.20):
    rcfg = ReceptorConfig(delta=delta)
    acfg = AgentConfig(num_classes=2)
    prep_all = [(prepare_series(i.series, rcfg), i.label, center(i)) for i in ds.instances]
    samples = [extract_features(p, m, rcfg) for p, _, _ in prep_all[:64] for m in ((np.arange(8) + 0.5) / 8)]
    store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng(0), column_scale=feature_scale(samples))
    rng = np.random.default_rng(42)
    print(f"== delta={delta}  (batch=32)")
    for epoch in range(6):
        order = rng.permutation(len(prep_all))
        tot = correct = 0
        gnorm = {"enc": 0.0, "gru": 0.0, "disc": 0.0}
        h_by_class = {0: [], 1: []}
        logit_mag = 0.0
        for start in range(0, len(order), 32):
            for idx in order[start : start + 32]:
                prep, y, c = prep_all[idx]
                trace, tape = run_episode(prep, store, rcfg, acfg, moments_override=[c, c, c])
                loss = cross_entropy(trace.logits_node, y)
                tape.backward(loss)
                h_by_class[y].append(trace.hiddens[-1].copy())
                logit_mag += np.abs(trace.logits_node.value).max()
                tot += loss.item()
                correct += trace.pred == y
            for g in gnorm:
                gnorm[g] += sum(np.abs(store[n].grad).sum() for n in store.names() if n.startswith(g))
            adam_step(store, lr=1e-3, weight_decay=1e-5)
        n = len(prep_all)
        h0 = np.mean(h_by_class[0], axis=0)
        h1 = np.mean(h_by_class[1], axis=0)
        hsd = np.std(np.vstack(h_by_class[0] + h_by_class[1]), axis=0).mean()
        print(f" ep {epoch}: loss {tot/n:.4f} acc {correct/n:.3f} "
              f"|grad| enc {gnorm['enc']/n:.3g} gru {gnorm['gru']/n:.3g} disc {gnorm['disc']/n:.3g} "
              f"|h0-h1| {np.abs(h0-h1).mean():.3g} h_sd {hsd:.3g} logit {logit_mag/n:.3g}")
