"""How decodable is the signal center c from the hidden state at init?

Ridge-regress c from h after one deterministic read, and from the raw
coarse density block. Report R^2 and the weight norm the readout needs
(Adam at lr=1e-3 grows coordinates by <= 1e-3 per update, so max|w|
bounds the updates a linear policy head needs)."""
import sys

import numpy as np

from itseek.autodiff import ParamStore
from itseek.features import ReceptorConfig, extract_features
from itseek.model import AgentConfig, init_agent, run_episode
from itseek.series import SplitSpec, split
from itseek.synth import MpiConfig, gen_mpi, _SIGNAL_VALUES
from itseek.training import _tag, prepare_instances

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
width = float(sys.argv[2]) if len(sys.argv) > 2 else 0.10
variant = sys.argv[3] if len(sys.argv) > 3 else "rms"


def signal_center(inst, w, tol=1e-9):
    t, v = inst.series.channels[0]
    template = _SIGNAL_VALUES[inst.label]
    for a in np.flatnonzero(v == template[0]):
        ta = float(t[a])
        mid = int(np.searchsorted(t, ta + w / 2.0 - tol))
        end = int(np.searchsorted(t, ta + w - tol))
        if mid >= len(t) or end >= len(t):
            continue
        if (v[mid] == template[1] and v[end] == template[2]
                and abs((t[mid] - ta) - w / 2.0) <= tol
                and abs((t[end] - ta) - w) <= tol):
            return (ta + w / 2.0) / float(t[-1])
    raise RuntimeError("no signal")


def ridge_stats(X, y, lam=1e-3):
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(X.shape[1]), Xc.T @ yc)
    pred = Xc @ w
    r2 = 1.0 - np.sum((pred - yc) ** 2) / np.sum(yc ** 2)
    return r2, np.abs(w).max(), np.linalg.norm(w)


ds = gen_mpi(MpiConfig(n=n, series_len=500, signal_width=width, seed=100))
train, _, _ = split(ds, SplitSpec(train=0.8, val=0.0, test=0.2, seed=0))
rcfg = ReceptorConfig(delta=max(0.05, 2 * width))
acfg = AgentConfig(num_classes=2)
prep = prepare_instances(train, rcfg)
centers = np.array([signal_center(inst, width) for inst in train.instances])

samples = np.stack([
    extract_features(p, m, rcfg) for p, _ in prep[:64] for m in ((np.arange(8) + 0.5) / 8.0)
])
rms = np.sqrt((samples * samples).mean(axis=0))
scale = 1.0 / np.maximum(rms, 1e-2)
if variant.startswith("rms-cq"):
    scale[3 * rcfg.w:4 * rcfg.w] *= float(variant[6:])

store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng([0, _tag("init")]),
                   column_scale=scale)

H1 = []
for p, _ in prep:
    trace, _ = run_episode(p, store, rcfg, acfg, mode="deterministic")
    H1.append(trace.hiddens[0])
H1 = np.stack(H1)

coarse_q = np.stack([extract_features(p, 0.5, rcfg)[3 * rcfg.w:4 * rcfg.w] for p, _ in prep])
feats_scaled = np.stack([extract_features(p, 0.5, rcfg) * scale for p, _ in prep])

for name, X in [("h1 (after first read)", H1),
                ("raw coarse-q block", coarse_q),
                ("scaled full features", feats_scaled)]:
    r2, wmax, wnorm = ridge_stats(X, centers)
    print(f"{name:24s} dim {X.shape[1]:4d}  R2 {r2:+.3f}  max|w| {wmax:8.3f}  ||w|| {wnorm:8.3f}")
print(f"h1 column std: median {np.median(H1.std(axis=0)):.4f} max {H1.std(axis=0).max():.4f}")
