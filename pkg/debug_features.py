"""Are centered-window features class-separable at delta=0.2?"""
import numpy as np

from itseek.features import ReceptorConfig, extract_features, feature_scale, prepare_series
from itseek.synth import MpiConfig, gen_mpi

SIG = 0.10
ds = gen_mpi(MpiConfig(n=600, series_len=500, signal_width=SIG, seed=5))

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
    X, ys = [], []
    for inst in ds.instances:
        prep = prepare_series(inst.series, rcfg)
        X.append(extract_features(prep, center(inst), rcfg))
        ys.append(inst.label)
    X = np.array(X)
    ys = np.array(ys)
    mu0, mu1 = X[ys == 0].mean(axis=0), X[ys == 1].mean(axis=0)
    sd = X.std(axis=0) + 1e-9
    sep = np.abs(mu0 - mu1) / sd
    top = np.argsort(sep)[::-1][:8]
    print(f"delta={delta}: top separability z-scores {np.round(sep[top], 2)} at dims {top}")
    print(f"  p_fine block = dims [0,50), q_fine [50,100), p_coarse [100,150), q_coarse [150,200)")
    # nearest-centroid accuracy on standardized features
    Z = (X - X.mean(axis=0)) / sd
    m0, m1 = Z[ys == 0].mean(axis=0), Z[ys == 1].mean(axis=0)
    pred = (np.linalg.norm(Z - m1, axis=1) < np.linalg.norm(Z - m0, axis=1)).astype(int)
    print(f"  nearest-centroid train acc: {(pred == ys).mean():.3f}")
    scale = feature_scale([extract_features(prepare_series(inst.series, rcfg), m, rcfg)
                           for inst in ds.instances[:64] for m in ((np.arange(8) + 0.5) / 8)])
    print(f"  feature_scale: p_fine median {np.median(scale[:50]):.3g} q_fine {np.median(scale[50:100]):.3g} "
          f"p_coarse {np.median(scale[100:150]):.3g} q_coarse {np.median(scale[150:]):.3g}")
