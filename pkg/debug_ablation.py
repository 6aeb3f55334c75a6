"""Can the discriminator learn from random moments (ablation condition)?
delta follows the coupling rule: 2 * 0.10 = 0.20."""
import numpy as np

from itseek.features import ReceptorConfig
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import AgentConfig, TrainConfig, evaluate, fit, prepare_instances

rcfg = ReceptorConfig(delta=0.20)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(epochs=40, seed=11)

ds = gen_mpi(MpiConfig(n=2000, series_len=500, signal_width=0.10, seed=5))
train, _, test = split(ds, SplitSpec(0.8, 0.0, 0.2, seed=5))
store, metrics = fit(train, None, rcfg, acfg, tcfg, random_moments=True, log=True)
test_prep = prepare_instances(test, rcfg)
print("ablation test acc:", evaluate(test_prep, store, rcfg, acfg, random_moments=True, seed=99))
