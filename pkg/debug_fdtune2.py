"""Tune GRU FD closure for healthy minimum gradient magnitude."""
import numpy as np

from itseek.autodiff import ParamStore, Tape, finite_diff_check, forward_gru_cell, init_gru

def variant(seed, bias_shift, w_scale):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    init_gru(store, "g", 3, 4, rng)
    for name in store.names():
        p = store[name]
        if name.endswith(("bz", "br", "bh")):
            p.value += rng.normal(bias_shift, 0.2, size=p.value.shape)
        else:
            p.value *= w_scale
    xs = [rng.normal(size=3) for _ in range(2)]
    h0 = rng.uniform(0.4, 1.2, size=4) * rng.choice([-1.0, 1.0], size=4)
    wvec = rng.uniform(1.0, 2.0, size=4) * rng.choice([-1.0, 1.0], size=4)

    def closure(s):
        tape = Tape()
        h = tape.const(h0)
        for x in xs:
            h = forward_gru_cell(tape, s, "g", tape.const(x), h)
        return (h * wvec).sum()

    rep = finite_diff_check(closure, store, tol_rel=1e-4)
    min_g = min(abs(e.g_fd) for e in [rep.worst] ) if rep.worst else 0
    return rep.worst.rel_err

for bias_shift, w_scale in [(0.4, 1.0), (0.4, 1.5), (0.2, 1.5), (0.0, 1.5)]:
    worsts = [variant(s, bias_shift, w_scale) for s in range(50)]
    print(f"bias_shift={bias_shift} w_scale={w_scale}: max {max(worsts):.3g} "
          f"p95 {np.percentile(worsts, 95):.3g} median {np.median(worsts):.3g}")
