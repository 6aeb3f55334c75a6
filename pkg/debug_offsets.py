"""Supervised-only learning with moments pinned at controlled offsets from
the true signal center. Crux test for the translated-pattern bootstrap."""
import sys

import numpy as np

from itseek.autodiff import ParamStore, adam_step
from itseek.features import ReceptorConfig, extract_features, feature_scale, prepare_series
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import cross_entropy

mode = sys.argv[1] if len(sys.argv) > 1 else "translated"  # centered | translated
delta = float(sys.argv[2]) if len(sys.argv) > 2 else 0.20
epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 30

rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2)
SIG = 0.10

ds = gen_mpi(MpiConfig(n=2000, series_len=500, signal_width=SIG, seed=5))
train, _, test = split(ds, SplitSpec(0.8, 0.0, 0.2, seed=5))

def centers(dataset):
    out = []
    for inst in dataset.instances:
        ch = inst.series.channels[0]
        vals, times = ch.values, ch.times
        # planted signal: three consecutive observations spaced SIG/2 apart
        # with values (1,1,1) or (1,0,1); noise is excluded from the window
        found = None
        for i in range(len(times) - 2):
            if abs(vals[i] - 1.0) < 1e-9 and abs(vals[i + 2] - 1.0) < 1e-9:
                d1, d2 = times[i + 1] - times[i], times[i + 2] - times[i + 1]
                if abs(d1 - SIG / 2) < 1e-9 and abs(d2 - SIG / 2) < 1e-9:
                    found = times[i + 1] / times[-1]
                    break
        assert found is not None
        out.append(found)
    return out

train_prep = [(prepare_series(inst.series, rcfg), inst.label) for inst in train.instances]
train_centers = centers(train)
test_prep = [(prepare_series(inst.series, rcfg), inst.label) for inst in test.instances]
test_centers = centers(test)

samples = [extract_features(p, m, rcfg) for p, _ in train_prep[:64] for m in ((np.arange(8) + 0.5) / 8)]
store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng(0), column_scale=feature_scale(samples))

rng = np.random.default_rng(42)
n = len(train_prep)
for epoch in range(epochs):
    order = rng.permutation(n)
    tot, correct = 0.0, 0
    for idx in order:
        prep, y = train_prep[idx]
        c = train_centers[idx]
        if mode == "centered":
            mo = [c, c, c]
        else:
            mo = list(np.clip(c + rng.uniform(-0.05, 0.05, size=3), 0.0, 1.0))
        trace, tape = run_episode(prep, store, rcfg, acfg, moments_override=mo)
        loss = cross_entropy(trace.logits_node, y)
        tape.backward(loss)
        adam_step(store, lr=1e-3, weight_decay=1e-5)
        tot += loss.item()
        correct += trace.pred == y
    print(f"epoch {epoch:2d} loss {tot/n:.4f} acc {correct/n:.3f}", flush=True)

rng_eval = np.random.default_rng(7)
correct = 0
for (prep, y), c in zip(test_prep, test_centers):
    if mode == "centered":
        mo = [c, c, c]
    else:
        mo = list(np.clip(c + rng_eval.uniform(-0.05, 0.05, size=3), 0.0, 1.0))
    trace, _ = run_episode(prep, store, rcfg, acfg, moments_override=mo)
    correct += trace.pred == y
print(f"{mode} delta={delta}: test acc {correct/len(test_prep):.3f}")
