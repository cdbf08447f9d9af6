import math

import numpy as np
import pytest

from cfbench.cfgan import (AdamState, CfganConfig, CfganRecommender, DivergenceError, Mlp, NetConfig,
                           NoiseSpec, NonFiniteGradientError, apply_mask, backprop_and_step,
                           build_condition, discriminator_forward, discriminator_loss,
                           generator_forward, generator_loss, load_checkpoint, recommend,
                           sample_noise, sample_zero_indices, sample_zero_mask, save_checkpoint, train)
from cfbench.cfgan.nets import add_weight_decay
from cfbench.cfgan.training import Trainer, network_sizes
from cfbench.dataset import DatasetSplit, make_split
from cfbench.tuning import EarlyStopping

from _gradcheck import central_differences, check, max_relative_error
from conftest import as_matrix, random_binary

SMALL = NetConfig(hidden_layers=1, hidden_features=50, steps=1, l2=1e-3, lr=1e-3, batch_size=32)


def small_config(**kw):
    base = dict(mode="user", variant="ZP", generator=SMALL, discriminator=SMALL, min_epochs=1, max_epochs=3)
    base.update(kw)
    return CfganConfig(**base)


def small_split(rng, n_users=40, n_items=30):
    m = as_matrix(random_binary(rng, n_users, n_items, 0.25, min_per_row=3))
    return make_split(m, 0.8, 0.8, seed=1)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"mode": "both"}, {"variant": "ZX"}, {"condition": "random"},
                                    {"noise_fraction": 0.3}, {"zr_coefficient": 1.5}, {"zr_ratio": 5},
                                    {"pm_ratio": 95}, {"min_epochs": 5, "max_epochs": 4}])
    def test_rejects_out_of_range(self, kw):
        with pytest.raises(ValueError):
            small_config(**kw)

    @pytest.mark.parametrize("kw", [{"hidden_layers": 5}, {"hidden_features": 40}, {"steps": 0},
                                    {"l2": 0.5}, {"lr": 1e-2}, {"batch_size": 300}])
    def test_net_ranges(self, kw):
        with pytest.raises(ValueError):
            small_config(generator=NetConfig(**{**SMALL.__dict__, **kw}))

    def test_flat_round_trip(self):
        flat = {"zr_coefficient": 0.3, "g_hidden_layers": 2, "g_lr": 2e-3, "d_batch_size": 100}
        cfg = CfganConfig.from_flat(flat, mode="item", variant="ZR")
        assert cfg.generator.hidden_layers == 2 and cfg.discriminator.batch_size == 100
        assert CfganConfig.from_dict(cfg.to_dict()) == cfg
        assert cfg.tag == "iZR"

    def test_network_sizes(self):
        noise, g, d = network_sizes(small_config(mode="item", noise_fraction=1.0), 1682, 943)
        assert noise.size == 943
        assert g == [943 + 943, 50, 943]
        assert d == [943 + 943, 50, 1]
        _, g, d = network_sizes(small_config(mode="user", condition="class"), 6040, 3706)
        assert g[0] == 6040 and g[-1] == 3706 and d[0] == 3706 + 6040


class TestNoiseAndConditions:
    def test_empty_noise(self):
        assert sample_noise(NoiseSpec(0), np.random.default_rng(0)).shape == (0,)

    def test_noise_size_from_fraction(self):
        assert NoiseSpec.for_width(1.0, 943).size == 943
        assert NoiseSpec.for_width(0.5, 3682).size == 1841
        assert NoiseSpec.for_width(2.0, 3682).size == 7364

    def test_noise_moments(self):
        z = sample_noise(NoiseSpec(10 ** 6), np.random.default_rng(7))
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1.0) < 0.01

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            NoiseSpec(-1)

    def test_conditions(self):
        np.testing.assert_array_equal(build_condition("profile", 0, [1, 0, 1], 3), [1, 0, 1])
        np.testing.assert_array_equal(build_condition("class", 2, [1, 0, 1, 0], 4), [0, 0, 1, 0])

    def test_class_condition_is_one_hot(self):
        for row in range(6):
            c = build_condition("class", row, np.zeros(3), 6)
            assert c.sum() == 1.0 and c[row] == 1.0 and len(c) == 6


class TestForward:
    def zero_net(self, sizes):
        return Mlp([(np.zeros((a, b)), np.zeros(b)) for a, b in zip(sizes[:-1], sizes[1:])])

    def test_zero_generator_half(self):
        g = self.zero_net([5, 4, 3])
        np.testing.assert_array_equal(generator_forward(g, np.zeros(2), np.ones(3)), 0.5)

    def test_zero_discriminator_half(self):
        d = self.zero_net([6, 4, 1])
        assert discriminator_forward(d, np.ones(3), np.zeros(3)) == 0.5

    def test_bounds(self, rng):
        g = Mlp.init([8, 20, 6], rng, np.float64)
        out = generator_forward(g, rng.standard_normal(2), rng.random(6))
        assert out.shape == (6,) and ((out > 0) & (out < 1)).all()
        d = Mlp.init([12, 20, 1], rng, np.float64)
        p = discriminator_forward(d, rng.random((4, 6)), rng.random((4, 6)))
        assert p.shape == (4,) and ((p > 0) & (p < 1)).all()

    def test_dimension_mismatch(self, rng):
        g = Mlp.init([8, 20, 6], rng)
        with pytest.raises(ValueError):
            generator_forward(g, np.zeros(3), np.zeros(6))

    def test_layer_chain_checked(self):
        with pytest.raises(ValueError):
            Mlp([(np.zeros((3, 4)), np.zeros(4)), (np.zeros((5, 2)), np.zeros(2))])

    def test_glorot_bounds(self, rng):
        net = Mlp.init([30, 20, 10], rng, np.float64)
        for (w, b), (fi, fo) in zip(net.layers, [(30, 20), (20, 10)]):
            assert np.abs(w).max() <= math.sqrt(6 / (fi + fo))
            np.testing.assert_array_equal(b, 0.0)


class TestSampling:
    def test_ratio_counts(self, rng):
        row = np.array([1, 0, 0, 1, 0, 0])
        idx = sample_zero_indices(row, 50, rng)
        assert len(idx) == 2 and (row[idx] == 0).all()
        assert len(sample_zero_indices(np.r_[np.ones(3), np.zeros(10)], 90, rng)) == 9

    def test_no_zeros(self, rng):
        assert len(sample_zero_indices(np.ones(5), 50, rng)) == 0

    def test_uniform_single(self):
        rng = np.random.default_rng(0)
        row = np.array([1, 0, 1, 0, 0, 1, 0])
        zeros = np.flatnonzero(row == 0)
        counts = dict.fromkeys(zeros, 0)
        trials = 100_000
        for _ in range(trials):
            counts[int(sample_zero_indices(row, 25, rng)[0])] += 1
        for c in counts.values():
            assert abs(c / trials - 0.25) < 0.01

    def test_uniform_batch(self):
        rng = np.random.default_rng(1)
        real = np.tile(np.array([1, 0, 1, 0, 0, 1, 0]), (100_000, 1))
        mask = sample_zero_mask(real, 25, rng)
        assert (mask.sum(axis=1) == 1).all()
        freq = mask.mean(axis=0)[real[0] == 0]
        np.testing.assert_allclose(freq, 0.25, atol=0.01)

    def test_batch_counts_and_support(self, rng):
        real = random_binary(rng, 50, 17, 0.4)
        for ratio in (10, 50, 90):
            mask = sample_zero_mask(real, ratio, rng)
            assert not (mask & (real != 0)).any()
            np.testing.assert_array_equal(mask.sum(axis=1), np.rint(ratio / 100 * (real == 0).sum(axis=1)))

    def test_single_zero_at_ninety(self, rng):
        mask = sample_zero_mask(np.array([[0.0]]), 90, rng)
        np.testing.assert_array_equal(mask, [[True]])


class TestMasking:
    def test_examples(self):
        fake, real = np.array([.2, .9, .4]), np.array([1, 0, 1])
        np.testing.assert_allclose(apply_mask(fake, real), [.2, 0, .4])
        np.testing.assert_allclose(apply_mask(fake, real, [1]), [.2, .9, .4])
        np.testing.assert_allclose(apply_mask(fake, np.ones(3)), fake)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            apply_mask(np.ones(3), np.ones(4))

    def test_soundness(self, rng):
        for _ in range(50):
            real = (rng.random(20) < 0.3).astype(float)
            fake = rng.random(20)
            out = apply_mask(fake, real)
            assert (out[real == 0] == 0).all()
            pm = sample_zero_indices(real, 40, rng)
            out = apply_mask(fake, real, pm)
            allowed = (real != 0)
            allowed[pm] = True
            assert (out[~allowed] == 0).all()
            np.testing.assert_array_equal(out[allowed], fake[allowed])


class TestLosses:
    def test_discriminator_values(self):
        assert discriminator_loss([0.5], [0.5]) == pytest.approx(2 * math.log(2))
        assert discriminator_loss([1 - 1e-12], [1e-12]) < 1e-6
        # batch mean of per-row losses 1 and 2
        d_real = np.array([math.exp(-1.0), math.exp(-2.0)])
        assert discriminator_loss(d_real, [0.0, 0.0]) == pytest.approx(1.5, abs=1e-6)

    def test_generator_values(self):
        assert generator_loss([0.5]) == pytest.approx(math.log(2))
        fake = np.array([[0.5, 0.5, 0.9]])
        zr = np.array([[True, True, False]])
        assert generator_loss([0.5], fake, zr, 1.0) == pytest.approx(math.log(2) + 0.5)
        assert generator_loss([0.5], fake, zr, 0.0) == pytest.approx(math.log(2))

    def test_clamped_and_nonnegative(self, rng):
        assert np.isfinite(discriminator_loss([0.0], [1.0]))
        assert np.isfinite(generator_loss([0.0]))
        for _ in range(100):
            p, q = rng.random(4), rng.random(4)
            assert discriminator_loss(p, q) >= 0
            assert generator_loss(q, rng.random((4, 3)), rng.random((4, 3)) < 0.5, rng.random()) >= 0


class TestOptimizer:
    def test_zero_gradient_no_change(self, rng):
        net = Mlp.init([4, 3, 2], rng, np.float64)
        before = [p.copy() for p in net.params()]
        adam = AdamState(net)
        _, acts = net.forward(rng.random((2, 4)), keep=True)
        backprop_and_step(net, adam, np.zeros((2, 2)), acts, 0.0, 1e-3)
        for a, b in zip(before, net.params()):
            np.testing.assert_array_equal(a, b)
        assert adam.t == 1

    def test_first_step_magnitude(self):
        w = np.array([1.0])
        net = Mlp([(w.reshape(1, 1), np.zeros(1))])
        adam = AdamState(net)
        adam.step([net.layers[0][0]], [np.array([[1.0]])], 1e-3)
        assert net.layers[0][0][0, 0] == pytest.approx(1 - 1e-3, abs=1e-10)

    def test_adam_matches_textbook(self, rng):
        p = rng.standard_normal(5)
        ref = p.copy()
        m = np.zeros(5)
        v = np.zeros(5)
        adam = AdamState.__new__(AdamState)
        adam.m, adam.v, adam.t = [np.zeros(5)], [np.zeros(5)], 0
        for t in range(1, 30):
            g = rng.standard_normal(5)
            adam.step([p], [g], 1e-2)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(p, ref, rtol=1e-12, atol=1e-14)

    def test_mlp_gradient_three_layers(self, rng):
        net = Mlp.init([5, 8, 6, 3], rng, np.float64)
        x = rng.random((4, 5))
        target = rng.random((4, 3))

        def loss():
            return 0.5 * float(((net.forward(x) - target) ** 2).sum())

        out, acts = net.forward(x, keep=True)
        grads, _ = net.backward(acts, out - target)
        assert max_relative_error(grads, central_differences(loss, net.params())) < 1e-4

    def test_weight_decay_gradient(self, rng):
        net = Mlp.init([3, 4, 2], rng, np.float64)
        x = rng.random((2, 3))
        l2 = 0.05

        def loss():
            return float(net.forward(x).sum()) + 0.5 * l2 * sum(float((w * w).sum()) for w, _ in net.layers)

        _, acts = net.forward(x, keep=True)
        grads, _ = net.backward(acts, np.ones((2, 2)))
        grads = add_weight_decay(net, grads, l2)
        assert max_relative_error(grads, central_differences(loss, net.params())) < 1e-4

    def test_non_finite_gradient_names_layer(self, rng):
        net = Mlp.init([3, 4, 2], rng, np.float64, name="generator")
        _, acts = net.forward(rng.random((2, 3)), keep=True)
        with pytest.raises(NonFiniteGradientError, match=r"non-finite gradient in generator layer \d (weights|bias)"):
            backprop_and_step(net, AdamState(net), np.array([[np.nan, 0.0], [0.0, 0.0]]), acts, 0.0, 1e-3)


class TestGradients:
    @pytest.mark.parametrize("variant", ["ZR", "PM", "ZP"])
    @pytest.mark.parametrize("condition", ["profile", "class"])
    def test_finite_differences(self, variant, condition):
        d_err, g_err = check(variant, condition, noise=True, seed=3)
        assert d_err < 1e-4 and g_err < 1e-4


class TestTraining:
    def test_single_epoch_history(self, rng):
        split = small_split(rng)
        cfg = small_config(generator=NetConfig(1, 50, 1, 1e-3, 1e-3, 256),
                           discriminator=NetConfig(1, 50, 1, 1e-3, 1e-3, 256), max_epochs=1)
        g, history = train(cfg, split, None, seed=0)
        assert len(history) == 1
        assert g.output_width == split.train.num_cols

    @pytest.mark.parametrize("mode", ["user", "item"])
    @pytest.mark.parametrize("variant", ["ZR", "PM", "ZP"])
    def test_determinism(self, rng, mode, variant):
        split = small_split(rng)
        cfg = small_config(mode=mode, variant=variant, noise_fraction=0.5)
        g1, h1 = train(cfg, split, None, seed=11)
        g2, h2 = train(cfg, split, None, seed=11)
        for a, b in zip(g1.params(), g2.params()):
            np.testing.assert_array_equal(a, b)
        assert [r.d_loss for r in h1.records] == [r.d_loss for r in h2.records]
        g3, _ = train(cfg, split, None, seed=12)
        assert not np.array_equal(g1.params()[0], g3.params()[0])

    def test_item_mode_orientation(self, rng):
        split = small_split(rng, 40, 30)
        g, _ = train(small_config(mode="item", max_epochs=1), split, None, seed=0)
        assert g.output_width == 40

    def test_early_stopping_returns_best(self, rng):
        split = small_split(rng)
        stopper = EarlyStopping(min_epochs=2, max_epochs=12, eval_every=2, patience=2)
        seen = {}

        def remember(record, trainer):
            if record.validation is not None:
                seen[record.epoch] = [p.copy() for p in trainer.g.params()]

        g, history = train(small_config(max_epochs=12), split, stopper, seed=0, callback=remember)
        evals = [r for r in history.records if r.validation is not None]
        assert evals and all(r.epoch % 2 == 0 for r in evals)
        best = max(evals, key=lambda r: (r.validation, -r.epoch))
        assert history.best_epoch == best.epoch
        for a, b in zip(g.params(), seen[best.epoch]):
            np.testing.assert_array_equal(a, b)
        assert history.stopped_epoch <= 12

    def test_stopper_needs_validation(self, rng):
        split = small_split(rng)
        with pytest.raises(ValueError):
            train(small_config(), DatasetSplit(split.train, split.test), EarlyStopping(1, 2, 1, 1))

    def test_divergence_carries_epoch(self, rng, monkeypatch):
        split = small_split(rng)
        calls = {"n": 0}
        orig = Trainer.epoch

        def flaky(self):
            calls["n"] += 1
            d, g = orig(self)
            return (float("nan"), g) if calls["n"] == 2 else (d, g)

        monkeypatch.setattr(Trainer, "epoch", flaky)
        with pytest.raises(DivergenceError) as err:
            train(small_config(max_epochs=3), split, None, seed=0)
        assert err.value.epoch == 2

    def test_float32_training(self, rng):
        split = small_split(rng)
        g, _ = train(small_config(dtype="float32", max_epochs=2), split, None, seed=0)
        assert g.dtype == np.float32


class TestRecommend:
    def test_excludes_seen_and_orders(self):
        # a generator whose output ignores inputs: scores come from the last bias
        b = np.log(np.array([0.9, 0.8, 0.7]) / (1 - np.array([0.9, 0.8, 0.7])))
        g = Mlp([(np.zeros((3, 3)), b)])
        cfg = small_config()
        out = recommend(g, cfg, 0, np.array([1, 0, 0]), 2)
        np.testing.assert_array_equal(out.items, [1, 2])
        assert (np.diff(out.scores) <= 0).all()

    def test_all_seen(self):
        g = Mlp([(np.zeros((3, 3)), np.zeros(3))])
        assert len(recommend(g, small_config(), 0, np.ones(3), 5).items) == 0

    def test_static_without_noise(self, rng):
        g = Mlp.init([6, 10, 6], rng)
        cfg = small_config()
        row = np.array([1, 0, 0, 1, 0, 0])
        a = recommend(g, cfg, 0, row, 3, rng=np.random.default_rng(1))
        b = recommend(g, cfg, 0, row, 3, rng=np.random.default_rng(2))
        np.testing.assert_array_equal(a.items, b.items)

    def test_recommender_item_mode_matches_generator(self, rng):
        split = small_split(rng, 20, 15)
        cfg = small_config(mode="item")
        g, _ = train(cfg, split, None, seed=0)
        ranker = CfganRecommender(g, cfg, split.train)
        scores = ranker.score(np.arange(20))
        items_profiles = split.train.transpose().dense_rows(np.arange(15)).astype(np.float32)
        np.testing.assert_allclose(scores, generator_forward(g, np.zeros((15, 0)), items_profiles).T)

    def test_width_check(self, rng):
        split = small_split(rng, 20, 15)
        with pytest.raises(ValueError):
            CfganRecommender(Mlp.init([7, 10, 15], rng), small_config(), split.train)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path, rng):
        split = small_split(rng)
        cfg = small_config(noise_fraction=2.0)
        g, _ = train(cfg, split, None, seed=5)
        save_checkpoint(tmp_path / "g.npz", g, cfg, seed=5, epochs=3)
        back, cfg2, meta = load_checkpoint(tmp_path / "g.npz")
        assert cfg2 == cfg
        assert meta["seed"] == 5 and meta["extra"] == {"epochs": 3}
        assert meta["config_hash"] == cfg.hash()
        for a, b in zip(g.params(), back.params()):
            assert a.dtype == b.dtype
            np.testing.assert_array_equal(a, b)
