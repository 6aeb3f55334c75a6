"""Reverse-mode gradient engine over numpy arrays, plus the layers,
initializer, optimizer, and checkpoint I/O the models are built from.

Design: a Tape records vector-valued Nodes in creation order. Because an
operation can only consume nodes that already exist, insertion order is a
topological order, and backward() is a single reverse sweep with no sort.
Each node carries a closure that scatters its output gradient to its
inputs; parameters are leaf nodes memoized per tape so repeated use
accumulates into one gradient buffer.

Everything is float64. The GRU cell is a single fused node with an
analytic backward; the finite-difference harness below is the referee for
that hand-derived math.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DiffError",
    "DimMismatch",
    "NonScalarLoss",
    "NonFiniteGradient",
    "Param",
    "ParamStore",
    "Tape",
    "Node",
    "matvec",
    "concat",
    "backward",
    "adam_step",
    "glorot_uniform",
    "LayerSpec",
    "init_layer",
    "init_linear",
    "init_gru",
    "init_mlp2",
    "forward_linear",
    "forward_gru_cell",
    "forward_mlp2",
    "FdEntry",
    "FdReport",
    "finite_diff_check",
    "save_checkpoint",
    "load_checkpoint",
]


class DiffError(ValueError):
    """Base class for gradient-engine violations."""


class DimMismatch(DiffError):
    pass


class NonScalarLoss(DiffError):
    pass


class NonFiniteGradient(DiffError):
    pass


class Param:
    """A named trainable array with gradient and Adam state buffers."""

    __slots__ = ("name", "value", "grad", "m", "v")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.value.shape})"


class ParamStore:
    """Insertion-ordered collection of Params addressed by name."""

    def __init__(self):
        self._params: dict[str, Param] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> Param:
        if name in self._params:
            raise DiffError(f"parameter {name!r} already exists")
        p = Param(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def num_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def clone(self) -> "ParamStore":
        other = ParamStore()
        for name, p in self._params.items():
            other.add(name, p.value.copy())
        other.step_count = self.step_count
        return other


class Node:
    """One tape entry: an eagerly-computed array and its backward closure."""

    __slots__ = ("value", "grad", "tape", "_backward")

    def __init__(self, value: np.ndarray, tape: "Tape", backward_fn: Callable[[], None] | None):
        self.value = value
        self.grad = None
        self.tape = tape
        self._backward = backward_fn

    # -- elementwise arithmetic (scalars and same-tape nodes) --------------

    def _lift(self, other) -> "Node":
        if isinstance(other, Node):
            if other.tape is not self.tape:
                raise DiffError("nodes belong to different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        other = self._lift(other)
        out = self.tape._record(self.value + other.value)

        def bw():
            _acc(self, out.grad)
            _acc(other, out.grad)

        out._backward = bw
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        out = self.tape._record(self.value - other.value)

        def bw():
            _acc(self, out.grad)
            _acc(other, -out.grad)

        out._backward = bw
        return out

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        other = self._lift(other)
        out = self.tape._record(self.value * other.value)

        def bw():
            _acc(self, out.grad * other.value)
            _acc(other, out.grad * self.value)

        out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        out = self.tape._record(self.value / other.value)

        def bw():
            _acc(self, out.grad / other.value)
            _acc(other, -out.grad * self.value / (other.value * other.value))

        out._backward = bw
        return out

    def __rtruediv__(self, other):
        return self._lift(other).__truediv__(self)

    def __neg__(self):
        return self.__mul__(-1.0)

    # -- unary ops ----------------------------------------------------------

    def relu(self) -> "Node":
        mask = self.value > 0
        out = self.tape._record(np.where(mask, self.value, 0.0))

        def bw():
            _acc(self, out.grad * mask)

        out._backward = bw
        return out

    def sigmoid(self) -> "Node":
        out = self.tape._record(_sigmoid(self.value))

        def bw():
            s = out.value
            _acc(self, out.grad * s * (1.0 - s))

        out._backward = bw
        return out

    def tanh(self) -> "Node":
        out = self.tape._record(np.tanh(self.value))

        def bw():
            _acc(self, out.grad * (1.0 - out.value * out.value))

        out._backward = bw
        return out

    def exp(self) -> "Node":
        out = self.tape._record(np.exp(self.value))

        def bw():
            _acc(self, out.grad * out.value)

        out._backward = bw
        return out

    def log(self) -> "Node":
        out = self.tape._record(np.log(self.value))

        def bw():
            _acc(self, out.grad / self.value)

        out._backward = bw
        return out

    def softmax(self) -> "Node":
        if self.value.ndim != 1:
            raise DimMismatch(f"softmax expects a vector, got shape {self.value.shape}")
        shifted = self.value - self.value.max()
        e = np.exp(shifted)
        s = e / e.sum()
        out = self.tape._record(s)

        def bw():
            g = out.grad
            _acc(self, s * (g - np.dot(g, s)))

        out._backward = bw
        return out

    def sum(self) -> "Node":
        out = self.tape._record(np.asarray(self.value.sum()))

        def bw():
            _acc(self, out.grad)

        out._backward = bw
        return out

    def item(self) -> float:
        if self.value.size != 1:
            raise DimMismatch(f"item() on shape {self.value.shape}")
        return float(self.value.reshape(()))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -x)) is 1/(1+e^-x) without overflow at large |x|
    return np.exp(-np.logaddexp(0.0, -x))


def _acc(node: Node, g: np.ndarray) -> None:
    """Accumulate g into node.grad, reducing or broadcasting across the
    scalar<->vector mismatches the elementwise ops permit."""
    target = node.grad
    if g.shape != target.shape:
        if g.size > target.size:
            g = np.sum(g).reshape(target.shape)
        elif g.size == target.size:
            g = g.reshape(target.shape)
        # a true scalar gradient flowing into a vector broadcasts in +=
    target += g


class Tape:
    """Records nodes in creation order; backward is one reverse sweep."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._param_nodes: dict[int, Node] = {}

    def _record(self, value: np.ndarray, backward_fn: Callable[[], None] | None = None) -> Node:
        node = Node(np.asarray(value, dtype=np.float64), self, backward_fn)
        self._nodes.append(node)
        return node

    def const(self, value) -> Node:
        return self._record(value, None)

    def param(self, p: Param) -> Node:
        """Leaf node for a parameter, memoized so reuse shares one buffer."""
        node = self._param_nodes.get(id(p))
        if node is None:
            node = self._record(p.value)

            def bw():
                p.grad += node.grad

            node._backward = bw
            self._param_nodes[id(p)] = node
        return node

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Node) -> None:
        """Seed d(loss)/d(loss)=1 and sweep the tape in reverse."""
        if loss.tape is not self:
            raise DiffError("loss node does not belong to this tape")
        if loss.value.size != 1:
            raise NonScalarLoss(f"loss must be scalar, got shape {loss.value.shape}")
        for node in self._nodes:
            node.grad = np.zeros_like(node.value)
        loss.grad[...] = 1.0
        for node in reversed(self._nodes):
            if node._backward is not None:
                node._backward()


def backward(loss: Node) -> None:
    loss.tape.backward(loss)


def matvec(w: Node, x: Node) -> Node:
    """Matrix-vector product: (m, n) @ (n,) -> (m,)."""
    if w.tape is not x.tape:
        raise DiffError("nodes belong to different tapes")
    if w.value.ndim != 2 or x.value.ndim != 1 or w.value.shape[1] != x.value.shape[0]:
        raise DimMismatch(f"matvec shapes {w.value.shape} @ {x.value.shape}")
    out = w.tape._record(w.value @ x.value)

    def bw():
        _acc(w, np.outer(out.grad, x.value))
        _acc(x, w.value.T @ out.grad)

    out._backward = bw
    return out


def concat(nodes: list[Node]) -> Node:
    """Concatenate vectors into one vector."""
    if not nodes:
        raise DimMismatch("concat of zero nodes")
    tape = nodes[0].tape
    for n in nodes:
        if n.tape is not tape:
            raise DiffError("nodes belong to different tapes")
        if n.value.ndim != 1:
            raise DimMismatch(f"concat expects vectors, got shape {n.value.shape}")
    sizes = [n.value.shape[0] for n in nodes]
    out = tape._record(np.concatenate([n.value for n in nodes]))

    def bw():
        off = 0
        for n, size in zip(nodes, sizes):
            _acc(n, out.grad[off : off + size])
            off += size

    out._backward = bw
    return out


# -- optimizer ---------------------------------------------------------------


def adam_step(
    store: ParamStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One bias-corrected Adam step with decoupled weight decay.

    Decay is applied to the value before the gradient update and never
    enters the moment buffers. Gradients are zeroed afterwards.
    Raises NonFiniteGradient (before touching any value) if any gradient
    entry is NaN or infinite.
    """
    for name, p in store.items():
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(f"non-finite gradient in {name!r}")
    t = store.step_count + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p in store.values():
        if weight_decay:
            p.value -= lr * weight_decay * p.value
        p.m *= beta1
        p.m += (1.0 - beta1) * p.grad
        p.v *= beta2
        p.v += (1.0 - beta2) * (p.grad * p.grad)
        p.value -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps)
        p.grad[...] = 0.0
    store.step_count = t


# -- initialization and layers ----------------------------------------------


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    hidden: int | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gru", "mlp2"):
            raise DiffError(f"unknown layer kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise DiffError("layer dimensions must be positive")
        if self.kind == "mlp2" and (self.hidden is None or self.hidden < 1):
            raise DiffError("mlp2 needs a positive hidden size")


def init_linear(store: ParamStore, prefix: str, out_dim: int, in_dim: int, rng: np.random.Generator) -> None:
    store.add(f"{prefix}.W", glorot_uniform(rng, out_dim, in_dim))
    store.add(f"{prefix}.b", np.zeros(out_dim))


def init_gru(store: ParamStore, prefix: str, in_dim: int, hidden: int, rng: np.random.Generator) -> None:
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.W{gate}", glorot_uniform(rng, hidden, in_dim))
        store.add(f"{prefix}.U{gate}", glorot_uniform(rng, hidden, hidden))
        store.add(f"{prefix}.b{gate}", np.zeros(hidden))


def init_mlp2(store: ParamStore, prefix: str, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> None:
    store.add(f"{prefix}.W1", glorot_uniform(rng, hidden, in_dim))
    store.add(f"{prefix}.b1", np.zeros(hidden))
    store.add(f"{prefix}.W2", glorot_uniform(rng, out_dim, hidden))
    store.add(f"{prefix}.b2", np.zeros(out_dim))


def init_layer(store: ParamStore, prefix: str, spec: LayerSpec, rng: np.random.Generator) -> None:
    if spec.kind == "linear":
        init_linear(store, prefix, spec.out_dim, spec.in_dim, rng)
    elif spec.kind == "gru":
        init_gru(store, prefix, spec.in_dim, spec.out_dim, rng)
    else:
        init_mlp2(store, prefix, spec.in_dim, spec.hidden, spec.out_dim, rng)


def forward_linear(tape: Tape, store: ParamStore, prefix: str, x: Node) -> Node:
    return matvec(tape.param(store[f"{prefix}.W"]), x) + tape.param(store[f"{prefix}.b"])


def forward_mlp2(tape: Tape, store: ParamStore, prefix: str, x: Node) -> Node:
    h = matvec(tape.param(store[f"{prefix}.W1"]), x) + tape.param(store[f"{prefix}.b1"])
    return matvec(tape.param(store[f"{prefix}.W2"]), h.relu()) + tape.param(store[f"{prefix}.b2"])


def forward_gru_cell(tape: Tape, store: ParamStore, prefix: str, x: Node, h: Node) -> Node:
    """One GRU step as a single fused node.

        z = sigmoid(Wz x + Uz h + bz)
        r = sigmoid(Wr x + Ur h + br)
        c = tanh(Wh x + Uh (r*h) + bh)
        h' = (1 - z)*h + z*c

    With zero weights and zero state the new state is exactly zero. The
    fused analytic backward (checked against central differences in the
    test suite) keeps long unrolls at one tape node per step.
    """
    if x.tape is not tape or h.tape is not tape:
        raise DiffError("nodes belong to different tapes")
    pz, puz, pbz = store[f"{prefix}.Wz"], store[f"{prefix}.Uz"], store[f"{prefix}.bz"]
    pr, pur, pbr = store[f"{prefix}.Wr"], store[f"{prefix}.Ur"], store[f"{prefix}.br"]
    ph, puh, pbh = store[f"{prefix}.Wh"], store[f"{prefix}.Uh"], store[f"{prefix}.bh"]
    if x.value.ndim != 1 or h.value.ndim != 1 or pz.value.shape != (h.value.shape[0], x.value.shape[0]):
        raise DimMismatch(f"gru shapes x={x.value.shape} h={h.value.shape} Wz={pz.value.shape}")

    xv, hv = x.value, h.value
    wz, uz, wr, ur, wh, uh = pz.value, puz.value, pr.value, pur.value, ph.value, puh.value
    z = _sigmoid(wz @ xv + uz @ hv + pbz.value)
    r = _sigmoid(wr @ xv + ur @ hv + pbr.value)
    rh = r * hv
    c = np.tanh(wh @ xv + uh @ rh + pbh.value)
    out = tape._record((1.0 - z) * hv + z * c)

    def bw():
        g = out.grad
        dz = g * (c - hv)
        dc = g * z
        dh = g * (1.0 - z)
        dac = dc * (1.0 - c * c)
        ph.grad += np.outer(dac, xv)
        pbh.grad += dac
        puh.grad += np.outer(dac, rh)
        drh = uh.T @ dac
        dh += drh * r
        dar = (drh * hv) * r * (1.0 - r)
        pr.grad += np.outer(dar, xv)
        pbr.grad += dar
        pur.grad += np.outer(dar, hv)
        dh += ur.T @ dar
        daz = dz * z * (1.0 - z)
        pz.grad += np.outer(daz, xv)
        pbz.grad += daz
        puz.grad += np.outer(daz, hv)
        dh += uz.T @ daz
        _acc(h, dh)
        _acc(x, wz.T @ daz + wr.T @ dar + wh.T @ dac)

    out._backward = bw
    return out


# -- gradient verification ----------------------------------------------------


@dataclass(frozen=True)
class FdEntry:
    param: str
    index: int
    g_ad: float
    g_fd: float
    rel_err: float


@dataclass
class FdReport:
    tol_rel: float
    num_checked: int = 0
    worst: FdEntry | None = None
    failures: list[FdEntry] = field(default_factory=list)
    per_param_max: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        worst = f"{self.worst.rel_err:.3g} at {self.worst.param}[{self.worst.index}]" if self.worst else "n/a"
        status = "ok" if self.passed else f"{len(self.failures)} failures"
        return f"fd-check: {self.num_checked} entries, worst rel err {worst}, {status}"


def finite_diff_check(
    closure: Callable[[ParamStore], Node],
    store: ParamStore,
    tol_rel: float = 1e-4,
    step: float = 1e-6,
    param_names: list[str] | None = None,
) -> FdReport:
    """Compare reverse-mode gradients against central differences.

    The closure must rebuild the same scalar loss from scratch on every
    call (fresh tape, frozen data and randomness) and must not mutate the
    store. Relative error is |g_ad - g_fd| / max(1e-8, |g_fd|) with step
    1e-6 per entry.
    """
    store.zero_grad()
    loss = closure(store)
    loss.tape.backward(loss)
    names = param_names if param_names is not None else store.names()
    ad_grads = {name: store[name].grad.copy() for name in names}
    store.zero_grad()

    report = FdReport(tol_rel=tol_rel)
    for name in names:
        p = store[name]
        flat = p.value.reshape(-1)
        worst_here = 0.0
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            f_plus = closure(store).item()
            flat[k] = orig - step
            f_minus = closure(store).item()
            flat[k] = orig
            g_fd = (f_plus - f_minus) / (2.0 * step)
            g_ad = float(ad_grads[name].reshape(-1)[k])
            rel = abs(g_ad - g_fd) / max(1e-8, abs(g_fd))
            entry = FdEntry(name, k, g_ad, g_fd, rel)
            report.num_checked += 1
            worst_here = max(worst_here, rel)
            if report.worst is None or rel > report.worst.rel_err:
                report.worst = entry
            if rel > tol_rel:
                report.failures.append(entry)
        report.per_param_max[name] = worst_here
    return report


# -- checkpoints ---------------------------------------------------------------

_CKPT_FORMAT = "itseek-checkpoint-1"


def save_checkpoint(path: str, store: ParamStore, config: dict | None = None) -> None:
    """Write parameters (exact float64 round trip) plus a config payload."""
    payload = {
        "format": _CKPT_FORMAT,
        "step_count": store.step_count,
        "config": config or {},
        "params": [
            {"name": name, "shape": list(p.value.shape), "data": p.value.reshape(-1).tolist()}
            for name, p in store.items()
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str, expect: ParamStore | None = None) -> tuple[ParamStore, dict]:
    """Load a checkpoint; with `expect`, verify names and shapes match it
    and copy values in place (optimizer state is reset)."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != _CKPT_FORMAT:
        raise DiffError(f"{path}: not a recognized checkpoint (format={payload.get('format')!r})")
    entries = {e["name"]: e for e in payload["params"]}
    if expect is not None:
        if set(entries) != set(expect.names()):
            missing = set(expect.names()) - set(entries)
            extra = set(entries) - set(expect.names())
            raise DiffError(f"checkpoint parameter names differ (missing={sorted(missing)}, extra={sorted(extra)})")
        store = expect
    else:
        store = ParamStore()
    for name, entry in entries.items():
        value = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if expect is not None:
            p = store[name]
            if p.value.shape != value.shape:
                raise DimMismatch(f"checkpoint {name!r} has shape {value.shape}, expected {p.value.shape}")
            p.value[...] = value
            p.grad[...] = 0.0
            p.m[...] = 0.0
            p.v[...] = 0.0
        else:
            store.add(name, value)
    store.step_count = int(payload.get("step_count", 0))
    return store, payload.get("config", {})
