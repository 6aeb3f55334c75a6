"""Joint training with z-scored encoder init (mean folded into bias)."""
import sys
import time

import numpy as np

from itseek.autodiff import ParamStore
from itseek.features import ReceptorConfig, extract_features
from itseek.model import AgentConfig, init_agent
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import TrainConfig, _tag, evaluate, fit, prepare_instances

width = float(sys.argv[1]) if len(sys.argv) > 1 else 0.10
batch = int(sys.argv[2]) if len(sys.argv) > 2 else 128
epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 40
n = int(sys.argv[4]) if len(sys.argv) > 4 else 5000
seed = int(sys.argv[5]) if len(sys.argv) > 5 else 0

t0 = time.perf_counter()
ds = gen_mpi(MpiConfig(n=n, series_len=500, signal_width=width, seed=100 + seed))
train, _, test = split(ds, SplitSpec(train=0.8, val=0.0, test=0.2, seed=seed))

delta = max(0.05, 2 * width)
rcfg = ReceptorConfig(delta=delta)
acfg = AgentConfig(num_classes=2)
tcfg = TrainConfig(lr=1e-3, weight_decay=1e-5, batch_size=batch, epochs=epochs, seed=seed,
                   target_acc=0.98, eval_every=2)

train_prep = prepare_instances(train, rcfg)
test_prep = prepare_instances(test, rcfg)

samples = np.stack([
    extract_features(prep, m, rcfg)
    for prep, _ in train_prep[:64]
    for m in ((np.arange(8) + 0.5) / 8.0)
])
mean = samples.mean(axis=0)
std = np.maximum(samples.std(axis=0), 1e-2)

store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng([seed, _tag("init")]),
                   column_scale=1.0 / std)
store["enc.b"].value -= store["enc.W"].value @ mean

store, metrics = fit(train_prep, None, rcfg, acfg, tcfg, store=store, log=True)
acc = evaluate(test_prep, store, rcfg, acfg)
print(f"Z seed {seed} width {width} B {batch} TEST ACC {acc:.4f} epochs {len(metrics.rows)} "
      f"total {time.perf_counter()-t0:.0f}s")
