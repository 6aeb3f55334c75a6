"""Imputation grids and the GRU baseline classifier."""

import numpy as np
import pytest

from itseek.autodiff import ParamStore
from itseek.baselines import (
    ImputeConfig,
    evaluate_baseline,
    impute,
    impute_dataset,
    init_baseline,
    train_baseline,
)
from itseek.series import (
    Channel,
    EmptySeries,
    Instance,
    IrregularSeries,
    LabeledDataset,
)
from itseek.training import TrainConfig


def make_series(times, values, sid="s"):
    ch = Channel(np.asarray(times, float), np.asarray(values, float))
    return IrregularSeries(id=sid, channels=(ch,))


def make_series2(ch0, ch1, sid="s"):
    return IrregularSeries(
        id=sid,
        channels=(
            Channel(np.asarray(ch0[0], float), np.asarray(ch0[1], float)),
            Channel(np.asarray(ch1[0], float), np.asarray(ch1[1], float)),
        ),
    )


class TestImputeConfig:
    def test_defaults(self):
        cfg = ImputeConfig()
        assert cfg.grid_size == 500
        assert cfg.method == "mean"
        assert cfg.extra == "none"

    @pytest.mark.parametrize(
        "kw",
        [
            {"grid_size": 1},
            {"grid_size": 0},
            {"method": "nearest"},
            {"extra": "decay"},
        ],
    )
    def test_bad_config_rejected(self, kw):
        with pytest.raises(ValueError):
            ImputeConfig(**kw)

    def test_step_features(self):
        assert ImputeConfig(extra="none").step_features == 1
        assert ImputeConfig(extra="delta_t").step_features == 2
        assert ImputeConfig(extra="mask").step_features == 2


class TestImpute:
    def test_single_observation_mean_fills_everywhere(self):
        s = make_series([0.4], [7.5])
        out = impute(s, ImputeConfig(grid_size=6, method="mean"))
        assert out.shape == (6, 1)
        assert np.array_equal(out, np.full((6, 1), 7.5))

    def test_aligned_dense_input_is_identity(self):
        # One observation per bin: t_k = k maps to bin k after the
        # max-timestamp normalization (the last bin is closed).
        grid = 8
        times = np.arange(grid, dtype=float)
        values = 10.0 * (np.arange(grid) + 1)
        s = make_series(times, values)
        out = impute(s, ImputeConfig(grid_size=grid, method="mean", extra="mask"))
        assert np.array_equal(out[:, 0], values)
        assert np.array_equal(out[:, 1], np.ones(grid))

    def test_linear_ramp_between_end_bins(self):
        # Observations land in the first and last bin; linear interpolation
        # must produce the affine ramp over the bin indices.
        s = make_series([0.0, 1.0], [0.0, 10.0])
        out = impute(s, ImputeConfig(grid_size=11, method="linear"))
        assert np.allclose(out[:, 0], np.arange(11.0), atol=1e-12)

    def test_bin_mean_aggregation(self):
        # Two observations share bin 0: the bin holds their mean.
        s = make_series([0.1, 0.2, 0.9], [1.0, 3.0, 10.0])
        out = impute(s, ImputeConfig(grid_size=2, method="mean"))
        assert out[0, 0] == 2.0
        assert out[1, 0] == 10.0

    def test_mean_fill_uses_observed_values(self):
        grid = 4
        # Bins 0 and 3 occupied with 2.0 and 6.0; empty bins take the
        # channel mean of the raw observations.
        s = make_series([0.0, 3.0], [2.0, 6.0])
        out = impute(s, ImputeConfig(grid_size=grid, method="mean"))
        assert np.array_equal(out[:, 0], [2.0, 4.0, 4.0, 6.0])

    def test_linear_fill_interpolates_and_extends_flat(self):
        grid = 5
        # Occupied bins 1 and 3 (values 2, 6): interior bin 2 interpolates
        # to 4, edge bins extend flat.
        s = make_series([1.2, 3.2], [2.0, 6.0])
        cfg = ImputeConfig(grid_size=grid, method="linear")
        idx = np.minimum((np.array([1.2, 3.2]) / 3.2 * grid).astype(int), grid - 1)
        assert list(idx) == [1, 4]  # sanity: bins land where intended
        out = impute(s, cfg)
        assert np.allclose(out[:, 0], [2.0, 2.0, 10.0 / 3, 14.0 / 3, 6.0], atol=1e-12)

    def test_linear_single_bin_is_constant(self):
        s = make_series([0.5], [7.0])
        out = impute(s, ImputeConfig(grid_size=5, method="linear"))
        assert np.array_equal(out[:, 0], np.full(5, 7.0))

    def test_empty_channel_fills_zeros(self):
        s = make_series2(([0.2, 0.8], [1.0, 2.0]), ([], []))
        out = impute(s, ImputeConfig(grid_size=4, method="mean", extra="mask"))
        assert out.shape == (4, 4)
        assert np.array_equal(out[:, 1], np.zeros(4))  # empty value column
        assert np.array_equal(out[:, 3], np.zeros(4))  # empty mask column

    def test_final_bin_closed(self):
        # t == max timestamp normalizes to exactly 1.0 and must land in
        # the last bin rather than fall off the grid.
        s = make_series([0.0, 2.0], [1.0, 9.0])
        out = impute(s, ImputeConfig(grid_size=10, method="mean", extra="mask"))
        assert out[9, 0] == 9.0
        assert out[9, 1] == 1.0

    def test_mask_is_occupancy_indicator(self):
        grid = 6
        # Normalized bins: 0 -> 0, 2.5/5*6 = 3.0 -> 3, 5/5*6 -> clamped 5.
        s = make_series([0.0, 2.5, 5.0], [1.0, 1.0, 1.0])
        out = impute(s, ImputeConfig(grid_size=grid, method="mean", extra="mask"))
        assert np.array_equal(out[:, 1], [1.0, 0.0, 0.0, 1.0, 0.0, 1.0])

    def test_delta_t_accumulates_and_resets(self):
        grid = 5
        # Bins 2 and 4 occupied: delta_t counts bins since the last
        # occupied one (normalized by grid), accumulating from the start
        # before the first and resetting to 0 at each occupied bin.
        s = make_series([0.5, 1.0], [3.0, 3.0])
        cfg = ImputeConfig(grid_size=grid, method="mean", extra="delta_t")
        out = impute(s, cfg)
        assert np.allclose(out[:, 1], np.array([1, 2, 0, 1, 0]) / grid, atol=1e-15)

    def test_delta_t_nonnegative_and_zero_at_observed(self):
        rng = np.random.default_rng(3)
        times = np.sort(rng.uniform(0, 1, size=17))
        s = make_series(times, rng.normal(size=17))
        cfg = ImputeConfig(grid_size=12, method="mean", extra="delta_t")
        out = impute(s, cfg)
        mask = impute(s, ImputeConfig(grid_size=12, method="mean", extra="mask"))[:, 1]
        assert (out[:, 1] >= 0).all()
        assert np.array_equal(out[mask == 1.0, 1], np.zeros(int(mask.sum())))

    def test_column_order_values_then_extras(self):
        s = make_series2(([0.0, 1.0], [1.0, 2.0]), ([0.5], [5.0]))
        out = impute(s, ImputeConfig(grid_size=2, method="mean", extra="mask"))
        # Columns: value ch0, value ch1, mask ch0, mask ch1. Channel 1's
        # lone observation at t=0.5 lands in bin 1 (0.5/1.0 * 2 = 1).
        assert out.shape == (2, 4)
        assert np.array_equal(out[:, 0], [1.0, 2.0])
        assert np.array_equal(out[:, 1], [5.0, 5.0])
        assert np.array_equal(out[:, 2], [1.0, 1.0])
        assert np.array_equal(out[:, 3], [0.0, 1.0])

    def test_timescale_invariance(self):
        times = np.array([0.1, 0.7, 1.3, 2.0])
        values = np.array([1.0, -2.0, 3.0, 0.5])
        cfg = ImputeConfig(grid_size=7, method="linear", extra="delta_t")
        a = impute(make_series(times, values), cfg)
        b = impute(make_series(10.0 * times, values), cfg)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("method", ["mean", "linear"])
    @pytest.mark.parametrize("extra", ["none", "delta_t", "mask"])
    def test_output_always_finite(self, method, extra):
        rng = np.random.default_rng(11)
        cfg = ImputeConfig(grid_size=9, method=method, extra=extra)
        for trial in range(20):
            k = int(rng.integers(1, 30))
            times = np.sort(rng.uniform(0, 5, size=k))
            times = np.unique(times)
            s = make_series(times, rng.normal(size=len(times)) * 100)
            out = impute(s, cfg)
            assert out.shape == (9, cfg.step_features)
            assert np.isfinite(out).all()


class TestImputeDataset:
    def test_maps_instances(self):
        insts = [
            Instance(make_series([0.0, 1.0], [1.0, 2.0], "a"), 0),
            Instance(make_series([0.5], [3.0], "b"), 1),
        ]
        ds = LabeledDataset(insts, num_classes=2)
        prep = impute_dataset(ds, ImputeConfig(grid_size=4))
        assert len(prep) == 2
        assert prep[0][1] == 0 and prep[1][1] == 1
        assert prep[0][0].shape == (4, 1)

    def test_empty_series_rejected(self):
        empty = IrregularSeries(id="e", channels=(Channel(np.array([]), np.array([])),))
        ds = LabeledDataset([Instance(empty, 0)], num_classes=2)
        with pytest.raises(EmptySeries):
            impute_dataset(ds, ImputeConfig(grid_size=4))


def toy_dataset(n=10, grid_hint=8, seed=0):
    """Separable two-class set: class 0 low values, class 1 high values."""
    rng = np.random.default_rng(seed)
    insts = []
    for i in range(n):
        label = i % 2
        times = np.sort(rng.uniform(0, 1, size=6))
        values = rng.normal(loc=3.0 * label, scale=0.3, size=6)
        insts.append(Instance(make_series(times, values, f"t{i}"), label))
    return LabeledDataset(insts, num_classes=2)


class TestInitBaseline:
    def test_shapes(self):
        cfg = ImputeConfig(grid_size=8, extra="mask")
        store = init_baseline(ParamStore(), cfg, num_channels=3, num_classes=2, hidden=5,
                              rng=np.random.default_rng(0))
        assert store["gru.Wz"].value.shape == (5, 6)
        assert store["gru.Uz"].value.shape == (5, 5)
        assert store["disc.W"].value.shape == (2, 5)
        assert np.array_equal(store["disc.b"].value, np.zeros(2))


class TestTrainBaseline:
    def test_memorizes_small_set(self):
        ds = toy_dataset(n=10)
        cfg = ImputeConfig(grid_size=8, method="mean")
        tcfg = TrainConfig(epochs=30, lr=1e-2, seed=0, eval_every=1)
        store, metrics = train_baseline(ds, None, cfg, tcfg, num_classes=2, hidden=16)
        assert metrics.rows[-1].acc_train == 1.0

    def test_metrics_schema(self):
        ds = toy_dataset(n=6)
        cfg = ImputeConfig(grid_size=5)
        tcfg = TrainConfig(epochs=3, lr=1e-2, seed=1, eval_every=1)
        _, metrics = train_baseline(ds, ds, cfg, tcfg, num_classes=2, hidden=8)
        assert len(metrics.rows) == 3
        for row in metrics.rows:
            assert row.loss_rl == 0.0
            assert row.loss_b == 0.0
            assert row.reward == 0.0
            assert row.recurrent_steps == 6 * 5

    def test_deterministic_under_seed(self):
        ds = toy_dataset(n=6)
        cfg = ImputeConfig(grid_size=5, extra="delta_t")
        tcfg = TrainConfig(epochs=3, lr=1e-2, seed=7, eval_every=1)
        _, m1 = train_baseline(ds, ds, cfg, tcfg, num_classes=2, hidden=8)
        _, m2 = train_baseline(ds, ds, cfg, tcfg, num_classes=2, hidden=8)
        for r1, r2 in zip(m1.rows, m2.rows):
            assert r1.loss_s == r2.loss_s
            assert r1.acc_train == r2.acc_train
            assert r1.acc_val == r2.acc_val

    def test_returns_best_val_checkpoint(self):
        ds = toy_dataset(n=8)
        cfg = ImputeConfig(grid_size=6)
        tcfg = TrainConfig(epochs=10, lr=1e-2, seed=2, eval_every=1)
        store, metrics = train_baseline(ds, ds, cfg, tcfg, num_classes=2, hidden=8)
        best_logged = max(row.acc_val for row in metrics.rows)
        assert evaluate_baseline(ds, store, cfg, hidden=8) == best_logged

    def test_accepts_preimputed_lists(self):
        ds = toy_dataset(n=6)
        cfg = ImputeConfig(grid_size=5)
        prep = impute_dataset(ds, cfg)
        tcfg = TrainConfig(epochs=2, lr=1e-2, seed=3, eval_every=1)
        _, m1 = train_baseline(prep, prep, cfg, tcfg, num_classes=2, hidden=8)
        _, m2 = train_baseline(ds, ds, cfg, tcfg, num_classes=2, hidden=8)
        assert m1.rows[-1].loss_s == m2.rows[-1].loss_s

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            train_baseline([], None, ImputeConfig(grid_size=4),
                           TrainConfig(epochs=1), num_classes=2)


class TestEvaluateBaseline:
    def test_zero_store_predicts_class_zero(self):
        ds = toy_dataset(n=10)
        cfg = ImputeConfig(grid_size=5)
        store = init_baseline(ParamStore(), cfg, 1, 2, 4, np.random.default_rng(0))
        for name in store.names():
            store[name].value[...] = 0.0
        # Zero logits -> argmax 0 -> accuracy equals the class-0 fraction.
        assert evaluate_baseline(ds, store, cfg, hidden=4) == 0.5

    def test_empty_returns_zero(self):
        store = init_baseline(ParamStore(), ImputeConfig(grid_size=4), 1, 2, 4,
                              np.random.default_rng(0))
        assert evaluate_baseline([], store, ImputeConfig(grid_size=4), hidden=4) == 0.0
