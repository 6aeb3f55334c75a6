"""Plain logistic regression on raw centered-moment features, on-tape, same Adam."""
import numpy as np

from itseek.autodiff import ParamStore, Tape, adam_step, matvec
from itseek.features import ReceptorConfig, extract_features, feature_scale, prepare_series
from itseek.synth import MpiConfig, gen_mpi
from itseek.training import cross_entropy

SIG = 0.10
ds = gen_mpi(MpiConfig(n=400, series_len=500, signal_width=SIG, seed=5))

def center(inst):
    ch = inst.series.channels[0]
    vals, times = ch.values, ch.times
    for i in range(len(times) - 2):
        if abs(vals[i] - 1.0) < 1e-9 and abs(vals[i + 2] - 1.0) < 1e-9:
            d1, d2 = times[i + 1] - times[i], times[i + 2] - times[i + 1]
            if abs(d1 - SIG / 2) < 1e-9 and abs(d2 - SIG / 2) < 1e-9:
                return times[i + 1] / times[-1]
    raise AssertionError

for delta in (0.10, 0.20):
    rcfg = ReceptorConfig(delta=delta)
    feats, ys = [], []
    for inst in ds.instances:
        prep = prepare_series(inst.series, rcfg)
        feats.append(extract_features(prep, center(inst), rcfg))
        ys.append(inst.label)
    feats = np.array(feats)
    scale = feature_scale(list(feats[:64]))
    X = feats * scale

    for mode in ("raw", "centered"):
        Xm = X - X.mean(axis=0) if mode == "centered" else X
        store = ParamStore()
        rng = np.random.default_rng(0)
        store.add("W", rng.normal(0, 0.01, (2, X.shape[1])))
        store.add("b", np.zeros(2))
        rng2 = np.random.default_rng(42)
        for epoch in range(6):
            order = rng2.permutation(len(ys))
            tot = correct = 0
            for idx in order:
                tape = Tape()
                x = tape.const(Xm[idx])
                logits = matvec(tape.param(store["W"]), x) + tape.param(store["b"])
                loss = cross_entropy(logits, ys[idx])
                tape.backward(loss)
                adam_step(store, lr=1e-3, weight_decay=1e-5)
                tot += loss.item()
                correct += int(np.argmax(logits.value)) == ys[idx]
            if epoch in (0, 2, 5):
                print(f" delta={delta} {mode}: ep {epoch} loss {tot/len(ys):.4f} acc {correct/len(ys):.3f}")
