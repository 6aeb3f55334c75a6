"""Joint-training probe with policy + fine-adoption diagnostics.

variant: rms | rms-cqG | rms-fqAcqB | zscore
  rms-cq4      -> coarse-density block gain 4
  rms-fq3cq6   -> fine blocks (interp+density) gain 3, coarse-density gain 6
diag: corr(mK,c), mae(mK,c) on deterministic episodes; acc(hit)/acc(miss)
on stochastic episodes (exogenous m0) where hit = min_j |m_j - c| < 0.07.
"""
import re
import sys
import time

import numpy as np

from itseek.autodiff import ParamStore
from itseek.features import ReceptorConfig, extract_features
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi, _SIGNAL_VALUES
from itseek.training import (TrainConfig, _tag, evaluate, joint_step,
                             prepare_instances, save_checkpoint)

sigma = float(sys.argv[1])
batch = int(sys.argv[2])
epochs = int(sys.argv[3])
n = int(sys.argv[4])
variant = sys.argv[5]
seed = int(sys.argv[6]) if len(sys.argv) > 6 else 0
width = float(sys.argv[7]) if len(sys.argv) > 7 else 0.10


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
    raise RuntimeError("no signal")


t0 = time.perf_counter()
ds = gen_mpi(MpiConfig(n=n, series_len=500, signal_width=width, seed=100 + seed))
train, _, test = split(ds, SplitSpec(train=0.8, val=0.0, test=0.2, seed=seed))

delta = max(0.05, 2 * width)
rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2, sigma=sigma)
tcfg = TrainConfig(lr=1e-3, weight_decay=1e-5, batch_size=batch, epochs=epochs, seed=seed)

train_prep = prepare_instances(train, rcfg)
test_prep = prepare_instances(test, rcfg)
test_c = np.array([signal_center(inst, width) for inst in test.instances])

samples = np.stack([
    extract_features(prep, m, rcfg)
    for prep, _ in train_prep[:64]
    for m in ((np.arange(8) + 0.5) / 8.0)
])
mean = samples.mean(axis=0)
std = np.maximum(samples.std(axis=0), 1e-2)
rms = np.sqrt((samples * samples).mean(axis=0))
scale = 1.0 / np.maximum(rms, 1e-2)
shift = np.zeros_like(mean)
w = rcfg.w
if variant.startswith("rms-"):
    m_fq = re.match(r"rms-fq([\d.]+)cq([\d.]+)$", variant)
    m_cq = re.match(r"rms-cq([\d.]+)$", variant)
    if m_fq:
        scale[0:2 * w] *= float(m_fq.group(1))
        scale[3 * w:4 * w] *= float(m_fq.group(2))
    elif m_cq:
        scale[3 * w:4 * w] *= float(m_cq.group(1))
    else:
        raise SystemExit(f"bad variant {variant}")
elif variant == "zscore":
    scale = 1.0 / std
    shift = mean
elif variant != "rms":
    raise SystemExit(f"bad variant {variant}")

store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng([seed, _tag("init")]),
                   column_scale=scale)
store["enc.b"].value -= store["enc.W"].value @ shift

N = len(train_prep)
tag = f"{variant}_s{sigma}_b{batch}_n{n}_sd{seed}"


def policy_diag():
    ms = []
    for prep, _ in test_prep[:250]:
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
        ms.append(trace.moments[-1])
    ms = np.array(ms)
    c = test_c[:250]
    corr = np.corrcoef(ms, c)[0, 1] if ms.std() > 1e-9 else 0.0
    return corr, np.mean(np.abs(ms - c))


def adoption_diag(num=400):
    rng = np.random.default_rng(12345)
    hits, correct = [], []
    for prep, y in test_prep[:num]:
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="stochastic", rng=rng)
        pred = int(np.argmax(trace.logits.value))
        i = int(prep.id[1:]) if prep.id[0] == "s" else 0
        hits.append(min(abs(m - test_c[:num][len(correct)]) for m in trace.moments) < 0.07)
        correct.append(pred == y)
    hits = np.array(hits)
    correct = np.array(correct, dtype=float)
    a_hit = correct[hits].mean() if hits.any() else float("nan")
    a_miss = correct[~hits].mean() if (~hits).any() else float("nan")
    return a_hit, a_miss, hits.mean()


for epoch in range(1, epochs + 1):
    order = np.random.default_rng([tcfg.seed, _tag("shuffle"), epoch]).permutation(N)
    stats = []
    for j, idx in enumerate(order):
        prep, y = train_prep[idx]
        rng = np.random.default_rng([tcfg.seed, _tag("episode"), epoch, int(idx)])
        last = (j + 1) % batch == 0 or j == N - 1
        stats.append(joint_step(prep, y, store, rcfg, acfg, tcfg, rng,
                                apply_update=last, loss_scale=1.0 / batch))
    acc = np.mean([s.correct for s in stats])
    rew = np.mean([s.reward for s in stats])
    if epoch % 5 == 0 or epoch == 1:
        corr, mae = policy_diag()
        a_hit, a_miss, frac = adoption_diag()
        acc_t = evaluate(test_prep, store, rcfg, acfg)
        print(f"epoch {epoch:3d} acc_train {acc:.3f} rew {rew:+.3f} | corr {corr:+.3f} "
              f"mae {mae:.3f} | hit {a_hit:.3f}/miss {a_miss:.3f} (f {frac:.2f}) "
              f"| acc_test {acc_t:.3f}", flush=True)
    else:
        print(f"epoch {epoch:3d} acc_train {acc:.3f} rew {rew:+.3f}", flush=True)

save_checkpoint(f"probe_{tag}.ckpt", store)
print(f"variant {variant} sigma {sigma} B {batch} done ({time.perf_counter()-t0:.0f}s) "
      f"-> probe_{tag}.ckpt", flush=True)
