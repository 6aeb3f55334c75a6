"""Criterion-1 protocol dry run: one seed, full scale."""
import sys
import time

import numpy as np

from itseek.features import ReceptorConfig
from itseek.model import AgentConfig
from itseek.synth import MpiConfig, gen_mpi
from itseek.series import LabeledDataset
from itseek.training import TrainConfig, evaluate, fit, prepare_instances

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
width = float(sys.argv[2]) if len(sys.argv) > 2 else 0.10
batch = int(sys.argv[3]) if len(sys.argv) > 3 else 128

t0 = time.perf_counter()
ds = gen_mpi(MpiConfig(n=5000, series_len=500, signal_width=width, seed=100 + seed))
from itseek.series import SplitSpec, split
train, _, test = split(ds, SplitSpec(train=0.8, val=0.0, test=0.2, seed=seed))

delta = max(0.05, 2 * width)
rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(lr=1e-3, weight_decay=1e-5, batch_size=batch, epochs=200, seed=seed,
                   target_acc=0.98, eval_every=2)

test_prep = prepare_instances(test, rcfg)
store, metrics = fit(train, None, rcfg, acfg, tcfg, log=True)
acc = evaluate(test_prep, store, rcfg, acfg)
print(f"SEED {seed} width {width} delta {delta} TEST ACC {acc:.4f} epochs {len(metrics.rows)} "
      f"total {time.perf_counter()-t0:.0f}s")
