"""Criterion-1 protocol, seed 0: n=5000, delta=0.10, receptor 0.20."""
import numpy as np

from itseek.features import ReceptorConfig
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import AgentConfig, TrainConfig, evaluate, fit, prepare_instances

rcfg = ReceptorConfig(delta=0.20)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(epochs=200, seed=0)

ds = gen_mpi(MpiConfig(n=5000, series_len=500, signal_width=0.10, seed=0))
train, _, test = split(ds, SplitSpec(0.8, 0.0, 0.2, seed=0))
store, metrics = fit(train, None, rcfg, acfg, tcfg, log=True)
test_prep = prepare_instances(test, rcfg)
print("test acc (best ckpt):", evaluate(test_prep, store, rcfg, acfg))
