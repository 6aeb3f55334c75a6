"""Joint-training probe: full fit() at reduced n, criterion-style settings."""
import sys

import numpy as np

from itseek.features import ReceptorConfig
from itseek.model import AgentConfig
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import TrainConfig, evaluate, fit, prepare_instances

delta_sig = float(sys.argv[1])
batch = int(sys.argv[2])
lr = float(sys.argv[3])
epochs = int(sys.argv[4])
n = int(sys.argv[5]) if len(sys.argv) > 5 else 2000

ds = gen_mpi(MpiConfig(n=n, series_len=500, signal_width=delta_sig, seed=11))
ntr = int(0.8 * n)
train = ds.instances[:ntr]
test = ds.instances[ntr:]

delta = max(0.05, 2 * delta_sig)
rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(lr=lr, batch_size=batch, epochs=epochs, seed=0, target_acc=0.995)

from itseek.series import LabeledDataset
train_ds = LabeledDataset(train, 2)
test_prep = prepare_instances(LabeledDataset(test, 2), rcfg)

store, metrics = fit(train_ds, None, rcfg, acfg, tcfg, log=True)
print("test acc:", evaluate(test_prep, store, rcfg, acfg))
