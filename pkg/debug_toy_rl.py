"""Toy REINFORCE: can the policy head track a clean target at given sigma?"""
import sys

import numpy as np

from itseek.autodiff import ParamStore, Tape, adam_step, init_linear
from itseek.model import moment_policy

sigma = float(sys.argv[1]) if len(sys.argv) > 1 else 0.05
batch = int(sys.argv[2]) if len(sys.argv) > 2 else 128
updates = int(sys.argv[3]) if len(sys.argv) > 3 else 1500
amp = float(sys.argv[4]) if len(sys.argv) > 4 else 1.0   # position amplitude in h
H = 8

use_baseline = len(sys.argv) > 5 and sys.argv[5] == "baseline"

rng = np.random.default_rng(0)
store = ParamStore()
init_linear(store, "policy", 1, H, rng)

b = 0.0
for step in range(1, updates + 1):
    err_sum = 0.0
    rew_sum = 0.0
    for _ in range(batch):
        c = rng.uniform(0.1, 0.9)
        h = np.concatenate([[amp * (c - 0.5)], rng.normal(size=H - 1)])
        tape = Tape()
        m, logpi, mu, _ = moment_policy(tape, store, tape.const(h), sigma, "stochastic", rng)
        r = 1.0 if abs(m - c) < 0.05 else -1.0
        adv = r - b if use_baseline else r
        loss = logpi * (-adv / batch)
        tape.backward(loss)
        err_sum += abs(mu - c)
        rew_sum += r
    adam_step(store, lr=1e-3, weight_decay=1e-5)
    if use_baseline:
        b = 0.95 * b + 0.05 * (rew_sum / batch)
    if step % 100 == 0 or step == 1:
        print(f"step {step:5d} mean|mu-c| {err_sum/batch:.4f} reward {rew_sum/batch:+.3f} "
              f"b {b:+.3f}", flush=True)
