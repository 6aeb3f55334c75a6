"""Watch the real fit() loop on a small MPi problem."""
import numpy as np

from itseek.features import ReceptorConfig
from itseek.model import run_episode
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, find_planted_signal, gen_mpi
from itseek.training import AgentConfig, TrainConfig, evaluate, fit, prepare_instances

rcfg = ReceptorConfig(delta=0.10)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(epochs=30, seed=11)

ds = gen_mpi(MpiConfig(n=400, series_len=500, signal_width=0.10, seed=5))
train, _, test = split(ds, SplitSpec(0.8, 0.0, 0.2, seed=5))
store, metrics = fit(train, None, rcfg, acfg, tcfg, log=True)

test_prep = prepare_instances(test, rcfg)
print("test acc (best ckpt):", evaluate(test_prep, store, rcfg, acfg))

# where does the deterministic policy point, vs the true signal centers?
hits = 0
for (prep, y), inst in zip(test_prep[:16], test.instances[:16]):
    trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
    sig = find_planted_signal(inst.series)
    center = (sig.t_first + sig.t_last) / 2.0 / max(ch.times[-1] for ch in inst.series.channels)
    near = any(abs(m - center) < 0.10 for m in trace.moments)
    hits += near
    if inst is test.instances[0] or len(trace.moments) < 5:
        print(f"  moments {[f'{m:.3f}' for m in trace.moments]} center {center:.3f} near={near} pred={trace.pred} y={y}")
print(f"det receptor within 0.10 of center: {hits}/16")
