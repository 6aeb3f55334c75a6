"""Controls: oracle-centered vs random moments, supervised-only training."""
import sys
import time

import numpy as np

from itseek.autodiff import ParamStore, adam_step
from itseek.features import ReceptorConfig, extract_features, feature_scale
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi, _SIGNAL_VALUES
from itseek.training import TrainConfig, _tag, cross_entropy, prepare_instances

mode = sys.argv[1]              # oracle | random
width = float(sys.argv[2])
batch = int(sys.argv[3])
epochs = int(sys.argv[4])
n = int(sys.argv[5])
lr = float(sys.argv[6]) if len(sys.argv) > 6 else 1e-3


def signal_center(inst, w, tol=1e-9):
    t, v = inst.series.channels[0]
    template = _SIGNAL_VALUES[inst.label]
    for a in np.flatnonzero(v == template[0]):
        ta = float(t[a])
        mid = int(np.searchsorted(t, ta + w / 2.0 - tol))
        end = int(np.searchsorted(t, ta + w - tol))
        if mid >= len(t) or end >= len(t):
            continue
        if (v[mid] == template[1] and v[end] == template[2]
                and abs((t[mid] - ta) - w / 2.0) <= tol
                and abs((t[end] - ta) - w) <= tol):
            return (ta + w / 2.0) / float(t[-1])
    raise RuntimeError(f"no signal in {inst.series.id}")


t0 = time.perf_counter()
ds = gen_mpi(MpiConfig(n=n, series_len=500, signal_width=width, seed=100))
train, _, test = split(ds, SplitSpec(train=0.8, val=0.0, test=0.2, seed=0))

delta = max(0.05, 2 * width)
rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2)

train_prep = prepare_instances(train, rcfg)
test_prep = prepare_instances(test, rcfg)
train_c = [signal_center(inst, width) for inst in train.instances]
test_c = [signal_center(inst, width) for inst in test.instances]

samples = [
    extract_features(prep, m, rcfg)
    for prep, _ in train_prep[:64]
    for m in ((np.arange(8) + 0.5) / 8.0)
]
store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng([0, _tag("init")]),
                   column_scale=feature_scale(samples))

N = len(train_prep)


def overrides_for(i, rng):
    if mode == "oracle":
        return [train_c[i]] * acfg.K
    return list(rng.uniform(size=acfg.K))


def eval_acc():
    rng = np.random.default_rng([0, _tag("evalmoments")])
    correct = 0
    for (prep, y), c in zip(test_prep, test_c):
        ov = [c] * acfg.K if mode == "oracle" else list(rng.uniform(size=acfg.K))
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic", moments_override=ov)
        correct += trace.pred == y
    return correct / len(test_prep)


for epoch in range(1, epochs + 1):
    order = np.random.default_rng([0, _tag("shuffle"), epoch]).permutation(N)
    rng = np.random.default_rng([0, _tag("episode"), epoch])
    correct = 0
    loss_sum = 0.0
    for j, idx in enumerate(order):
        prep, y = train_prep[idx]
        trace, tape = run_episode(prep, store, rcfg, acfg, mode="stochastic", rng=rng,
                                  moments_override=overrides_for(int(idx), rng))
        loss = cross_entropy(trace.logits_node, y) * (1.0 / batch)
        tape.backward(loss)
        if (j + 1) % batch == 0 or j == N - 1:
            adam_step(store, lr=lr, weight_decay=1e-5)
        loss_sum += loss.item() * batch
        correct += trace.pred == y
    line = f"epoch {epoch:3d} loss {loss_sum/N:.4f} acc_train {correct/N:.3f}"
    if epoch % 5 == 0 or epoch == epochs:
        line += f" acc_test {eval_acc():.3f}"
    print(line, flush=True)

print(f"{mode} width {width} B {batch} lr {lr} final test {eval_acc():.4f} "
      f"({time.perf_counter()-t0:.0f}s)")
