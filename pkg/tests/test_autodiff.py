"""Gradient engine: op-level oracles, finite-difference referees, Adam, and
checkpoint round trips."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itseek.autodiff import (
    DiffError,
    DimMismatch,
    LayerSpec,
    NonFiniteGradient,
    NonScalarLoss,
    ParamStore,
    Tape,
    adam_step,
    concat,
    finite_diff_check,
    forward_gru_cell,
    forward_linear,
    forward_mlp2,
    glorot_uniform,
    init_gru,
    init_layer,
    init_linear,
    init_mlp2,
    load_checkpoint,
    matvec,
    save_checkpoint,
)

finite_vectors = st.lists(
    st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=1, max_size=6
)


def make_store(**arrays) -> ParamStore:
    store = ParamStore()
    for name, value in arrays.items():
        store.add(name, np.asarray(value, dtype=np.float64))
    return store


class TestTapeBasics:
    def test_insertion_order_is_topological(self):
        tape = Tape()
        a = tape.const([1.0, 2.0])
        b = a * 2.0
        c = b + a
        assert len(tape) == 4  # a, lifted 2.0, b, c
        assert c.value.tolist() == [3.0, 6.0]

    def test_param_leaf_memoized(self):
        store = make_store(w=[1.0, 2.0])
        tape = Tape()
        first = tape.param(store["w"])
        second = tape.param(store["w"])
        assert first is second

    def test_mixing_tapes_rejected(self):
        t1, t2 = Tape(), Tape()
        a = t1.const([1.0])
        b = t2.const([1.0])
        with pytest.raises(DiffError):
            a + b

    def test_backward_requires_scalar(self):
        tape = Tape()
        a = tape.const([1.0, 2.0])
        with pytest.raises(NonScalarLoss):
            tape.backward(a + 0.0)

    def test_simple_chain_gradient(self):
        # loss = w * x with x = 2 -> dloss/dw = 2
        store = make_store(w=[3.0])
        tape = Tape()
        loss = (tape.param(store["w"]) * 2.0).sum()
        tape.backward(loss)
        assert store["w"].grad.tolist() == [2.0]

    def test_relu_inactive_gradient_zero(self):
        store = make_store(w=[0.5])
        tape = Tape()
        loss = (tape.param(store["w"]) * -1.0).relu().sum()
        tape.backward(loss)
        assert store["w"].grad.tolist() == [0.0]

    def test_shared_node_accumulates_both_consumers(self):
        # loss = a*a + 3a => dloss/da = 2a + 3
        store = make_store(a=[1.5])
        tape = Tape()
        a = tape.param(store["a"])
        loss = (a * a + a * 3.0).sum()
        tape.backward(loss)
        assert store["a"].grad.tolist() == [2 * 1.5 + 3.0]

    def test_matvec_shape_mismatch(self):
        tape = Tape()
        w = tape.const(np.ones((2, 3)))
        x = tape.const(np.ones(2))
        with pytest.raises(DimMismatch):
            matvec(w, x)

    def test_concat_values_and_grads(self):
        store = make_store(a=[1.0, 2.0], b=[3.0])
        tape = Tape()
        cat = concat([tape.param(store["a"]), tape.param(store["b"])])
        assert cat.value.tolist() == [1.0, 2.0, 3.0]
        loss = (cat * np.array([1.0, 10.0, 100.0])).sum()
        tape.backward(loss)
        assert store["a"].grad.tolist() == [1.0, 10.0]
        assert store["b"].grad.tolist() == [100.0]


class TestOpGradients:
    """Every primitive against central differences (the spec's referee)."""

    @pytest.mark.parametrize("seed", range(10))
    def test_elementwise_ops(self, seed):
        rng = np.random.default_rng(seed)
        store = make_store(a=rng.normal(size=4), b=rng.normal(size=4) + 3.0)

        def closure(s):
            tape = Tape()
            a, b = tape.param(s["a"]), tape.param(s["b"])
            expr = (a * b + a - b / (b * b + 1.0)) * 0.5 + (a * a).tanh()
            return (expr.sigmoid() + expr.relu() + (expr * expr + 1.0).log()).sum()

        report = finite_diff_check(closure, store, tol_rel=1e-6)
        assert report.passed, report.summary()

    @pytest.mark.parametrize("seed", range(10))
    def test_exp_log_softmax(self, seed):
        rng = np.random.default_rng(100 + seed)
        store = make_store(z=rng.normal(size=5))

        def closure(s):
            tape = Tape()
            z = tape.param(s["z"])
            p = (z * 0.7).exp().log().softmax()
            return (p * np.arange(5.0)).sum()

        report = finite_diff_check(closure, store, tol_rel=1e-5)
        assert report.passed, report.summary()

    def test_softmax_sums_to_one_and_positive(self):
        tape = Tape()
        p = tape.const(np.array([3.0, -1.0, 0.5, 700.0])).softmax()
        assert abs(p.value.sum() - 1.0) <= 1e-12
        assert (p.value > 0).all()

    def test_negative_control_detects_corrupted_rule(self):
        # A deliberately wrong backward must fail the check.
        store = make_store(w=[0.7, -0.2])

        def closure(s):
            tape = Tape()
            w = tape.param(s["w"])
            out = w.tanh()
            broken = tape._record(out.value.copy())

            def bw():
                out.grad += broken.grad * 2.0  # wrong jacobian on purpose

            broken._backward = bw
            return broken.sum()

        report = finite_diff_check(closure, store, tol_rel=1e-4)
        assert not report.passed


class TestGruCell:
    def test_zero_weights_zero_state_fixed_point(self):
        store = ParamStore()
        for gate in ("z", "r", "h"):
            store.add(f"g.W{gate}", np.zeros((3, 2)))
            store.add(f"g.U{gate}", np.zeros((3, 3)))
            store.add(f"g.b{gate}", np.zeros(3))
        tape = Tape()
        out = forward_gru_cell(tape, store, "g", tape.const(np.array([5.0, -2.0])), tape.const(np.zeros(3)))
        assert out.value.tolist() == [0.0, 0.0, 0.0]

    def test_scalar_hand_oracle(self):
        # 1-dim cell, hand-set weights, evaluated manually:
        #   x=0.5, h=0.25, Wz=1, Uz=2, bz=0.1, Wr=-1, Ur=0.5, br=0.2,
        #   Wh=2, Uh=-0.5, bh=0.3
        #   z = sigmoid(0.5 + 0.5 + 0.1)         = sigmoid(1.1)
        #   r = sigmoid(-0.5 + 0.125 + 0.2)      = sigmoid(-0.175)
        #   c = tanh(1.0 - 0.5*(r*0.25) + 0.3)   = tanh(1.3 - 0.125*r)
        #   h' = (1-z)*0.25 + z*c
        store = make_store(
            **{
                "g.Wz": [[1.0]], "g.Uz": [[2.0]], "g.bz": [0.1],
                "g.Wr": [[-1.0]], "g.Ur": [[0.5]], "g.br": [0.2],
                "g.Wh": [[2.0]], "g.Uh": [[-0.5]], "g.bh": [0.3],
            }
        )
        z = 1.0 / (1.0 + math.exp(-1.1))
        r = 1.0 / (1.0 + math.exp(0.175))
        c = math.tanh(1.3 - 0.125 * r)
        expected = (1.0 - z) * 0.25 + z * c
        tape = Tape()
        out = forward_gru_cell(tape, store, "g", tape.const(np.array([0.5])), tape.const(np.array([0.25])))
        assert out.value[0] == pytest.approx(expected, abs=1e-15)

    def test_state_stays_bounded(self):
        rng = np.random.default_rng(3)
        store = ParamStore()
        init_gru(store, "g", 4, 6, rng)
        tape = Tape()
        h = tape.const(rng.uniform(-1, 1, size=6))
        bound = max(np.abs(h.value).max(), 1.0)
        for _ in range(20):
            h = forward_gru_cell(tape, store, "g", tape.const(rng.normal(size=4) * 5), h)
        assert np.abs(h.value).max() <= bound + 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_two_step_unroll_matches_fd(self, seed):
        # Nonzero gate biases, a signed random h0, and signed loss weights
        # keep every parameter's gradient well above the central-difference
        # noise floor (~1e-10 absolute at step 1e-6).
        rng = np.random.default_rng(200 + seed)
        store = ParamStore()
        init_gru(store, "g", 3, 4, rng)
        for name in store.names():
            if name.endswith(("bz", "br", "bh")):
                store[name].value += rng.normal(0.4, 0.2, size=4)
        xs = [rng.normal(size=3), rng.normal(size=3)]
        h0 = rng.uniform(0.4, 1.2, size=4) * rng.choice([-1.0, 1.0], size=4)
        wvec = rng.uniform(1.0, 2.0, size=4) * rng.choice([-1.0, 1.0], size=4)

        def closure(s):
            tape = Tape()
            h = tape.const(h0)
            for x in xs:
                h = forward_gru_cell(tape, s, "g", tape.const(x), h)
            return (h * wvec).sum()

        report = finite_diff_check(closure, store, tol_rel=1e-4)
        assert report.passed, report.summary()

    def test_fused_cell_matches_unfused_composition(self):
        # The fused node against the same math written in primitive ops,
        # both values and parameter gradients.
        rng = np.random.default_rng(9)
        store = ParamStore()
        init_gru(store, "g", 3, 4, rng)
        for p in store.values():
            p.value += rng.normal(0, 0.3, size=p.value.shape)
        x_val, h_val = rng.normal(size=3), rng.normal(size=4)

        tape = Tape()
        fused = forward_gru_cell(tape, store, "g", tape.const(x_val), tape.const(h_val))
        tape.backward((fused * np.arange(1.0, 5.0)).sum())
        fused_grads = {name: store[name].grad.copy() for name in store.names()}
        fused_value = fused.value.copy()

        store.zero_grad()
        tape = Tape()
        x, h = tape.const(x_val), tape.const(h_val)
        pz, puz, pbz = (tape.param(store[k]) for k in ("g.Wz", "g.Uz", "g.bz"))
        pr, pur, pbr = (tape.param(store[k]) for k in ("g.Wr", "g.Ur", "g.br"))
        ph, puh, pbh = (tape.param(store[k]) for k in ("g.Wh", "g.Uh", "g.bh"))
        z = (matvec(pz, x) + matvec(puz, h) + pbz).sigmoid()
        r = (matvec(pr, x) + matvec(pur, h) + pbr).sigmoid()
        c = (matvec(ph, x) + matvec(puh, r * h) + pbh).tanh()
        ref = (1.0 - z) * h + z * c
        tape.backward((ref * np.arange(1.0, 5.0)).sum())

        np.testing.assert_allclose(fused_value, ref.value, rtol=0, atol=1e-15)
        for name in store.names():
            np.testing.assert_allclose(fused_grads[name], store[name].grad, rtol=1e-12, atol=1e-14)


class TestLayers:
    def test_linear_identity(self):
        store = make_store(**{"lin.W": np.eye(2), "lin.b": np.zeros(2)})
        tape = Tape()
        out = forward_linear(tape, store, "lin", tape.const(np.array([1.0, 2.0])))
        assert out.value.tolist() == [1.0, 2.0]

    def test_linear_bias_only(self):
        store = make_store(**{"lin.W": np.zeros((1, 3)), "lin.b": [3.0]})
        tape = Tape()
        out = forward_linear(tape, store, "lin", tape.const(np.array([9.0, 9.0, 9.0])))
        assert out.value.tolist() == [3.0]

    def test_mlp2_matches_dense_oracle(self):
        rng = np.random.default_rng(4)
        store = ParamStore()
        init_mlp2(store, "m", 3, 5, 2, rng)
        for p in store.values():
            p.value += rng.normal(0, 0.5, size=p.value.shape)
        x = rng.normal(size=3)
        tape = Tape()
        out = forward_mlp2(tape, store, "m", tape.const(x))
        hidden = np.maximum(store["m.W1"].value @ x + store["m.b1"].value, 0.0)
        expected = store["m.W2"].value @ hidden + store["m.b2"].value
        np.testing.assert_allclose(out.value, expected, rtol=0, atol=1e-15)

    def test_layer_spec_validation(self):
        with pytest.raises(DiffError):
            LayerSpec("conv", 1, 1)
        with pytest.raises(DiffError):
            LayerSpec("linear", 0, 1)
        with pytest.raises(DiffError):
            LayerSpec("mlp2", 2, 2)

    def test_init_layer_creates_expected_names(self):
        rng = np.random.default_rng(0)
        store = ParamStore()
        init_layer(store, "a", LayerSpec("linear", 3, 2), rng)
        init_layer(store, "b", LayerSpec("gru", 3, 2), rng)
        init_layer(store, "c", LayerSpec("mlp2", 3, 2, hidden=4), rng)
        assert "a.W" in store and "a.b" in store
        assert all(f"b.{k}{g}" in store for k in "WUb" for g in "zrh")
        assert all(f"c.{k}" in store for k in ("W1", "b1", "W2", "b2"))

    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=40))
    @settings(max_examples=30, deadline=None)
    def test_glorot_bound_property(self, out_dim, in_dim):
        w = glorot_uniform(np.random.default_rng(out_dim * 41 + in_dim), out_dim, in_dim)
        limit = math.sqrt(6.0 / (in_dim + out_dim))
        assert w.shape == (out_dim, in_dim)
        assert (np.abs(w) <= limit).all()


class TestAdam:
    def test_first_step_oracle(self):
        # g=1, lr=1e-3, wd=0: m_hat=1, v_hat=1 -> delta = -lr/(1+eps) ~ -1e-3
        store = make_store(w=[0.0])
        store["w"].grad[:] = 1.0
        adam_step(store, lr=1e-3, weight_decay=0.0)
        expected = -1e-3 / (1.0 + 1e-8)
        assert store["w"].value[0] == pytest.approx(expected, rel=1e-12)

    def test_two_step_hand_oracle(self):
        # Constant gradient 1: bias-corrected m_hat = v_hat = 1 at every
        # step, so each update is exactly -lr/(1+eps).
        store = make_store(w=[1.0])
        for _ in range(2):
            store["w"].grad[:] = 1.0
            adam_step(store, lr=0.01, weight_decay=0.0)
        expected = 1.0 - 2 * (0.01 / (1.0 + 1e-8))
        assert store["w"].value[0] == pytest.approx(expected, rel=1e-12)
        assert store.step_count == 2

    def test_zero_gradient_no_move(self):
        store = make_store(w=[2.0])
        adam_step(store, lr=1.0, weight_decay=0.0)
        assert store["w"].value[0] == 2.0

    def test_decoupled_weight_decay_applied_before_update(self):
        # wd with zero gradient shrinks weights multiplicatively and does
        # nothing else.
        store = make_store(w=[10.0])
        adam_step(store, lr=0.1, weight_decay=0.5)
        assert store["w"].value[0] == pytest.approx(10.0 * (1 - 0.1 * 0.5), rel=1e-12)

    def test_nonfinite_gradient_rejected(self):
        store = make_store(w=[0.0])
        store["w"].grad[:] = np.nan
        with pytest.raises(NonFiniteGradient):
            adam_step(store)

    def test_gradients_zeroed_after_step(self):
        store = make_store(w=[0.0])
        store["w"].grad[:] = 5.0
        adam_step(store)
        assert store["w"].grad.tolist() == [0.0]


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        store = ParamStore()
        init_linear(store, "head", 3, 7, rng)
        store["head.W"].value[0, 0] = 0.1 + 0.2  # a value with messy repr
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, store, config={"delta": 0.1})
        loaded, cfg = load_checkpoint(path)
        assert cfg == {"delta": 0.1}
        for name in store.names():
            assert (loaded[name].value == store[name].value).all()

    def test_expect_mode_rejects_shape_mismatch(self, tmp_path):
        rng = np.random.default_rng(1)
        store = ParamStore()
        init_linear(store, "head", 2, 2, rng)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, store)
        other = ParamStore()
        init_linear(other, "head", 3, 2, rng)
        with pytest.raises(DiffError):
            load_checkpoint(path, expect=other)

    def test_checkpoint_is_json_with_format_tag(self, tmp_path):
        store = make_store(w=[1.0])
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, store)
        with open(path) as fh:
            payload = json.load(fh)
        assert payload["format"] == "itseek-checkpoint-1"


class TestDeterminism:
    @given(finite_vectors)
    @settings(max_examples=25, deadline=None)
    def test_tape_evaluation_deterministic(self, xs):
        def run():
            tape = Tape()
            a = tape.const(np.asarray(xs))
            return ((a * 2.0 + 1.0).tanh() + a.sigmoid()).sum().item()

        assert run() == run()
