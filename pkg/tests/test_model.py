"""Episode mechanics: policy, baseline, discriminator, trace shape laws."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itseek.autodiff import ParamStore, Tape, forward_gru_cell
from itseek.features import ReceptorConfig, extract_features, prepare_series
from itseek.model import (
    BASELINE_HIDDEN,
    AgentConfig,
    baseline_predict,
    discriminate,
    init_agent,
    moment_policy,
    run_episode,
    transition_step,
)
from itseek.series import series_from_pairs


def small_setup(K=3, H=8, L=6, w=4, num_classes=2, seed=0, sigma=0.05):
    rcfg = ReceptorConfig(delta=0.2, w=w, L=L)
    acfg = AgentConfig(num_classes=num_classes, K=K, H=H, sigma=sigma)
    store = init_agent(ParamStore(), rcfg, acfg, 1, np.random.default_rng(seed))
    return rcfg, acfg, store


def toy_prepared(rcfg, seed=1):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 1, 30))
    t += np.arange(30) * 1e-9
    v = rng.normal(size=30)
    series = series_from_pairs("toy", [list(zip(t.tolist(), v.tolist()))])
    return prepare_series(series, rcfg)


class TestAgentConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"num_classes": 1},
            {"num_classes": 2, "K": 0},
            {"num_classes": 2, "H": 0},
            {"num_classes": 2, "sigma": 0.0},
        ],
    )
    def test_bad_config_rejected(self, kw):
        with pytest.raises(ValueError):
            AgentConfig(**kw)

    def test_defaults(self):
        cfg = AgentConfig(num_classes=2)
        assert (cfg.K, cfg.H, cfg.sigma) == (3, 64, 0.05)


class TestInitAgent:
    def test_expected_parameter_names(self):
        _, _, store = small_setup()
        names = set(store.names())
        assert {"enc.W", "enc.b", "policy.W", "policy.b", "disc.W", "disc.b"} <= names
        assert any(n.startswith("gru.") for n in names)
        assert any(n.startswith("baseline.") for n in names)

    def test_shapes(self):
        rcfg, acfg, store = small_setup(H=8, L=6, w=4)
        assert store["enc.W"].value.shape == (6, 16)
        assert store["policy.W"].value.shape == (1, 8)
        assert store["disc.W"].value.shape == (2, 8)
        assert store["baseline.W1"].value.shape == (BASELINE_HIDDEN, 8)
        assert store["baseline.W2"].value.shape == (1, BASELINE_HIDDEN)

    def test_biases_start_at_zero(self):
        _, _, store = small_setup()
        for name in store.names():
            if name.endswith(".b") or name.endswith(".b1") or name.endswith(".b2"):
                assert np.all(store[name].value == 0.0), name


class TestTransitionStep:
    def test_zero_weights_zero_state_stay_zero(self):
        rcfg, acfg, store = small_setup()
        for name in store.names():
            if name.startswith("gru."):
                store[name].value[:] = 0.0
        tape = Tape()
        x = tape.const(np.ones(rcfg.L + 1))
        h = tape.const(np.zeros(acfg.H))
        out = transition_step(tape, store, x, h)
        assert np.all(out.value == 0.0)

    def test_matches_fused_gru_cell(self):
        rcfg, acfg, store = small_setup(seed=3)
        tape = Tape()
        x = tape.const(np.random.default_rng(0).normal(size=rcfg.L + 1))
        h = tape.const(np.random.default_rng(1).normal(size=acfg.H))
        a = transition_step(tape, store, x, h)
        tape2 = Tape()
        b = forward_gru_cell(tape2, store, "gru", tape2.const(x.value), tape2.const(h.value))
        # same params, same inputs -> identical values even across tapes
        assert np.array_equal(a.value, b.value)


class TestMomentPolicy:
    def test_zero_weights_mean_half(self):
        _, acfg, store = small_setup()
        store["policy.W"].value[:] = 0.0
        store["policy.b"].value[:] = 0.0
        tape = Tape()
        h = tape.const(np.random.default_rng(0).normal(size=acfg.H))
        m, logpi, mu, u = moment_policy(tape, store, h, 0.05, "deterministic", None)
        assert mu == 0.5
        assert m == 0.5

    def test_deterministic_uses_mean(self):
        _, acfg, store = small_setup(seed=11)
        tape = Tape()
        h = tape.const(np.random.default_rng(2).normal(size=acfg.H))
        m, _, mu, u = moment_policy(tape, store, h, 0.05, "deterministic", None)
        assert m == mu == u

    def test_sample_above_one_clamped(self):
        _, acfg, store = small_setup()
        tape = Tape()
        h = tape.const(np.zeros(acfg.H))
        m, _, mu, u = moment_policy(tape, store, h, 0.05, "stochastic", None, frozen_u=1.2)
        assert u == 1.2
        assert m == 1.0

    def test_sample_below_zero_clamped(self):
        _, acfg, store = small_setup()
        tape = Tape()
        h = tape.const(np.zeros(acfg.H))
        m, _, _, u = moment_policy(tape, store, h, 0.05, "stochastic", None, frozen_u=-0.3)
        assert m == 0.0

    def test_log_density_at_mean_sigma_point_one(self):
        _, acfg, store = small_setup()
        store["policy.W"].value[:] = 0.0
        store["policy.b"].value[:] = 0.0
        tape = Tape()
        h = tape.const(np.zeros(acfg.H))
        _, logpi, mu, _ = moment_policy(tape, store, h, 0.1, "stochastic", None, frozen_u=0.5)
        assert mu == 0.5
        want = -np.log(0.1 * np.sqrt(2.0 * np.pi))
        assert logpi.item() == pytest.approx(want, abs=1e-12)
        assert logpi.item() == pytest.approx(1.3836465597893728, abs=1e-9)

    def test_log_density_matches_gaussian_formula(self):
        _, acfg, store = small_setup(seed=5)
        tape = Tape()
        h = tape.const(np.random.default_rng(4).normal(size=acfg.H))
        sigma = 0.07
        _, logpi, mu, u = moment_policy(tape, store, h, sigma, "stochastic", None, frozen_u=0.61)
        want = -0.5 * ((u - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)
        assert logpi.item() == pytest.approx(want, abs=1e-12)

    def test_stochastic_requires_rng(self):
        _, acfg, store = small_setup()
        tape = Tape()
        h = tape.const(np.zeros(acfg.H))
        with pytest.raises(ValueError):
            moment_policy(tape, store, h, 0.05, "stochastic", None)

    def test_unknown_mode_rejected(self):
        _, acfg, store = small_setup()
        tape = Tape()
        h = tape.const(np.zeros(acfg.H))
        with pytest.raises(ValueError):
            moment_policy(tape, store, h, 0.05, "greedy", None)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_stochastic_moments_always_in_unit_interval(self, seed):
        _, acfg, store = small_setup()
        tape = Tape()
        h = tape.const(np.random.default_rng(seed).normal(size=acfg.H))
        m, _, _, _ = moment_policy(tape, store, h, 0.5, "stochastic", np.random.default_rng(seed))
        assert 0.0 <= m <= 1.0


class TestBaseline:
    def test_zero_weights_zero_value(self):
        _, acfg, store = small_setup()
        for name in store.names():
            if name.startswith("baseline."):
                store[name].value[:] = 0.0
        b = baseline_predict(Tape(), store, np.ones(acfg.H))
        assert b.item() == 0.0

    def test_matches_dense_mlp_oracle(self):
        _, acfg, store = small_setup(seed=7)
        h = np.random.default_rng(3).normal(size=acfg.H)
        b = baseline_predict(Tape(), store, h)
        w1, b1 = store["baseline.W1"].value, store["baseline.b1"].value
        w2, b2 = store["baseline.W2"].value, store["baseline.b2"].value
        want = (w2 @ np.maximum(w1 @ h + b1, 0.0) + b2).item()
        assert b.item() == pytest.approx(want, abs=1e-12)

    def test_input_is_detached(self):
        """The baseline reads a plain array: no hidden-state node in its graph."""
        _, acfg, store = small_setup(seed=7)
        tape = Tape()
        b = baseline_predict(tape, store, np.ones(acfg.H))
        tape.backward(b)
        assert np.any(store["baseline.W1"].grad != 0.0)
        assert np.all(store["enc.W"].grad == 0.0)
        assert np.all(store["gru.Wz"].grad == 0.0)


class TestDiscriminate:
    def test_zero_weights_uniform_probs(self):
        _, acfg, store = small_setup()
        store["disc.W"].value[:] = 0.0
        store["disc.b"].value[:] = 0.0
        tape = Tape()
        _, probs, _ = discriminate(tape, store, tape.const(np.ones(acfg.H)))
        assert np.allclose(probs, [0.5, 0.5], atol=1e-12)

    def test_large_gap_picks_class_zero(self):
        _, acfg, store = small_setup()
        store["disc.W"].value[:] = 0.0
        store["disc.b"].value[:] = np.array([10.0, -10.0])
        tape = Tape()
        _, probs, pred = discriminate(tape, store, tape.const(np.zeros(acfg.H)))
        assert pred == 0
        assert probs[0] > 0.99

    def test_probs_sum_to_one(self):
        _, acfg, store = small_setup(num_classes=5, seed=9)
        tape = Tape()
        _, probs, _ = discriminate(tape, store, tape.const(np.random.default_rng(0).normal(size=acfg.H)))
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_prediction_invariant_to_logit_shift(self):
        _, acfg, store = small_setup(seed=9)
        h = np.random.default_rng(5).normal(size=acfg.H)
        tape = Tape()
        _, _, pred = discriminate(tape, store, tape.const(h))
        store["disc.b"].value += 7.5
        tape2 = Tape()
        _, _, pred2 = discriminate(tape2, store, tape2.const(h))
        assert pred == pred2


class TestRunEpisode:
    def test_trace_shape_law(self):
        rcfg, acfg, store = small_setup(K=3)
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, rng=np.random.default_rng(0))
        assert len(trace.moments) == 3
        assert len(trace.hiddens) == 3
        assert trace.num_actions == 2
        assert len(trace.logpi_nodes) == 2
        assert len(trace.baseline_nodes) == 2
        assert trace.probs.shape == (2,)
        assert trace.pred in (0, 1)

    def test_k1_has_no_actions(self):
        rcfg, acfg, store = small_setup(K=1)
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, rng=np.random.default_rng(0))
        assert trace.num_actions == 0
        assert len(trace.moments) == 1

    def test_moments_stay_in_unit_interval(self):
        rcfg, acfg, store = small_setup(K=5, sigma=0.8)
        prep = toy_prepared(rcfg)
        for seed in range(20):
            trace, _ = run_episode(prep, store, rcfg, acfg, rng=np.random.default_rng(seed))
            assert all(0.0 <= m <= 1.0 for m in trace.moments)

    def test_deterministic_mode_is_reproducible(self):
        rcfg, acfg, store = small_setup(seed=13)
        prep = toy_prepared(rcfg)
        a, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
        b, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
        assert a.moments == b.moments
        assert np.array_equal(a.logits_node.value, b.logits_node.value)
        assert a.pred == b.pred

    def test_deterministic_first_moment_is_half(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
        assert trace.moments[0] == 0.5

    def test_stochastic_first_moment_uniform(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        firsts = [
            run_episode(prep, store, rcfg, acfg, rng=np.random.default_rng(s))[0].moments[0]
            for s in range(200)
        ]
        assert min(firsts) < 0.2 and max(firsts) > 0.8
        assert abs(np.mean(firsts) - 0.5) < 0.1

    def test_moments_override_pins_sequence_and_skips_policy(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, moments_override=[0.1, 0.5, 0.9])
        assert trace.moments == [0.1, 0.5, 0.9]
        assert trace.num_actions == 0
        assert trace.baseline_nodes == []

    def test_moments_override_wrong_length_rejected(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        with pytest.raises(ValueError):
            run_episode(prep, store, rcfg, acfg, moments_override=[0.1, 0.5])

    def test_samples_override_replays_stochastic_episode(self):
        rcfg, acfg, store = small_setup(seed=17)
        prep = toy_prepared(rcfg)
        live, _ = run_episode(prep, store, rcfg, acfg, rng=np.random.default_rng(42))
        pinned = [live.moments[0]] + live.samples
        replay, _ = run_episode(prep, store, rcfg, acfg, samples_override=pinned)
        assert replay.moments == live.moments
        assert replay.samples == live.samples
        assert np.array_equal(replay.logits_node.value, live.logits_node.value)
        assert [n.item() for n in replay.logpi_nodes] == [n.item() for n in live.logpi_nodes]

    def test_samples_override_keeps_policy_and_baseline_on_tape(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, samples_override=[0.4, 0.6, 0.5])
        assert trace.num_actions == 2
        assert len(trace.baseline_nodes) == 2

    def test_stochastic_mode_requires_rng(self):
        rcfg, acfg, store = small_setup()
        prep = toy_prepared(rcfg)
        with pytest.raises(ValueError):
            run_episode(prep, store, rcfg, acfg, mode="stochastic")

    def test_hidden_states_evolve(self):
        rcfg, acfg, store = small_setup(seed=19)
        prep = toy_prepared(rcfg)
        trace, _ = run_episode(prep, store, rcfg, acfg, mode="deterministic")
        assert not np.array_equal(trace.hiddens[0], trace.hiddens[1])
        assert not np.array_equal(trace.hiddens[1], trace.hiddens[2])
