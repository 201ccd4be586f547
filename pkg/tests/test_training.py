import math

import numpy as np
import pytest

from mcmlp import autograd as ag
from mcmlp import model as md
from mcmlp import training as trn
from mcmlp.autograd import Tensor
from mcmlp.errors import ConfigError, NumericsError

RNG = np.random.default_rng(55)


class StubRng:
    """Deterministic stand-in for numpy's Generator in augmentation tests."""

    def __init__(self, beta=0.5, perm=None, center=(0, 0)):
        self._beta = beta
        self._perm = perm
        self._center = list(center)

    def beta(self, a, b):
        return self._beta

    def permutation(self, n):
        return np.array(self._perm) if self._perm is not None else np.arange(n)[::-1]

    def integers(self, n):
        return self._center.pop(0)

    def random(self):
        return 0.0


def scalar_adam_oracle(theta, grad, lr, b1, b2, eps, steps):
    """Plain Adam on one scalar, mirroring the update formula term by term
    (same operation order, so trajectories must agree bit for bit)."""
    m = v = 0.0
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * (grad * grad)
        theta = theta - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return theta


class TestTrainConfig:
    def test_defaults_match_recipe(self):
        cfg = trn.TrainConfig()
        assert cfg.epochs == 300 and cfg.warmup_epochs == 3
        assert cfg.base_lr == 0.01 and cfg.weight_decay == 1e-5
        assert cfg.mixup_alpha == 0.2 and cfg.cutmix_alpha == 0.4
        assert cfg.betas == (0.9, 0.999) and cfg.eps == 1e-8
        assert cfg.resolved_min_lr == pytest.approx(1e-4)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(epochs=3, warmup_epochs=3),
            dict(warmup_epochs=-1),
            dict(base_lr=0.0),
            dict(weight_decay=-1e-5),
            dict(batch_size=0),
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            trn.TrainConfig(**kwargs)


class TestAdamW:
    def _single_param(self, value):
        p = Tensor(np.array(value), requires_grad=True)
        params = {"w": p}
        state = trn.AdamWState.initialize(params)
        return p, params, state

    def test_hand_evaluated_first_step(self):
        p, params, state = self._single_param([[1.0]])
        cfg = trn.TrainConfig(weight_decay=0.0, mixup_alpha=0, cutmix_alpha=0)
        trn.adamw_step(params, {"w": np.array([[1.0]])}, state, lr=0.1, cfg=cfg)
        # bias correction makes m_hat = v_hat = 1 on the first step
        assert p.data[0, 0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), abs=1e-12)
        assert state.t == 1

    def test_zero_gradient_leaves_params_unchanged(self):
        p, params, state = self._single_param([[0.7, -0.3]])
        cfg = trn.TrainConfig(weight_decay=0.0)
        before = p.data.copy()
        trn.adamw_step(params, {"w": np.zeros((1, 2))}, state, lr=0.1, cfg=cfg)
        assert np.array_equal(p.data, before)

    def test_decoupled_decay_in_isolation(self):
        p, params, state = self._single_param([[2.0, -4.0]])
        cfg = trn.TrainConfig(weight_decay=0.01)
        theta0 = p.data.copy()
        trn.adamw_step(params, {"w": np.zeros((1, 2))}, state, lr=0.5, cfg=cfg)
        assert np.array_equal(p.data, theta0 - (0.5 * 0.01) * theta0)
        assert np.allclose(p.data, (1 - 0.5 * 0.01) * theta0, rtol=1e-15)

    def test_decay_skips_biases_and_ln_params(self):
        bias = Tensor(np.array([1.0, 2.0]), requires_grad=True)  # 1-D: no decay
        params = {"b": bias}
        state = trn.AdamWState.initialize(params)
        cfg = trn.TrainConfig(weight_decay=0.5)
        trn.adamw_step(params, {"b": np.zeros(2)}, state, lr=0.5, cfg=cfg)
        assert np.array_equal(bias.data, [1.0, 2.0])

    def test_matches_scalar_oracle_trajectory(self):
        p, params, state = self._single_param([[0.5]])
        cfg = trn.TrainConfig(weight_decay=0.0)
        for _ in range(10):
            trn.adamw_step(params, {"w": np.array([[0.3]])}, state, lr=0.01, cfg=cfg)
        expected = scalar_adam_oracle(0.5, 0.3, 0.01, 0.9, 0.999, 1e-8, 10)
        assert p.data[0, 0] == expected

    def test_first_update_magnitude_near_lr(self):
        p, params, state = self._single_param([[1.0]])
        cfg = trn.TrainConfig(weight_decay=0.0)
        trn.adamw_step(params, {"w": np.array([[0.25]])}, state, lr=0.01, cfg=cfg)
        assert abs(1.0 - p.data[0, 0]) == pytest.approx(0.01, rel=1e-5)

    def test_zero_decay_reproduces_plain_adam_elementwise(self):
        theta0 = RNG.uniform(-1, 1, (3, 2))
        grad = RNG.uniform(-1, 1, (3, 2))
        p = Tensor(theta0.copy(), requires_grad=True)
        params = {"w": p}
        state = trn.AdamWState.initialize(params)
        cfg = trn.TrainConfig(weight_decay=0.0)
        for _ in range(7):
            trn.adamw_step(params, {"w": grad}, state, lr=0.02, cfg=cfg)
        oracle = np.array(
            [
                [scalar_adam_oracle(theta0[i, j], grad[i, j], 0.02, 0.9, 0.999, 1e-8, 7)
                 for j in range(2)]
                for i in range(3)
            ]
        )
        assert np.array_equal(p.data, oracle)

    def test_non_finite_gradient_aborts_with_name(self):
        p, params, state = self._single_param([[1.0]])
        cfg = trn.TrainConfig()
        bad = np.array([[np.nan]])
        with pytest.raises(NumericsError, match="'w'"):
            trn.adamw_step(params, {"w": bad}, state, lr=0.1, cfg=cfg)


class TestSchedule:
    CFG = trn.TrainConfig(epochs=10, warmup_epochs=2, base_lr=0.01, min_lr=1e-4)

    def test_ramp_start(self):
        assert trn.lr_at(0, 5, self.CFG) == 0.0
        assert trn.lr_at(1, 5, self.CFG) == pytest.approx(0.01 / 10)

    def test_end_of_warmup_hits_base_lr(self):
        warmup_steps = 2 * 5
        assert trn.lr_at(warmup_steps, 5, self.CFG) == pytest.approx(0.01)

    def test_final_step_hits_min_lr(self):
        assert trn.lr_at(50, 5, self.CFG) == pytest.approx(1e-4)
        assert trn.lr_at(80, 5, self.CFG) == pytest.approx(1e-4)

    def test_continuity_at_junction(self):
        warmup_steps = 10
        below = trn.lr_at(warmup_steps - 1, 5, self.CFG)
        at = trn.lr_at(warmup_steps, 5, self.CFG)
        assert abs(at - below) <= self.CFG.base_lr / warmup_steps + 1e-12

    def test_monotone_nonincreasing_after_warmup(self):
        values = [trn.lr_at(s, 5, self.CFG) for s in range(10, 51)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_default_min_lr_is_percent_of_base(self):
        cfg = trn.TrainConfig(epochs=4, warmup_epochs=0, base_lr=0.5)
        assert trn.lr_at(4, 1, cfg) == pytest.approx(0.005)


class TestMixup:
    def test_lambda_one_keeps_batch(self):
        imgs = RNG.uniform(size=(4, 3, 8, 8))
        labels = trn.one_hot(np.array([0, 1, 2, 3]), 5)
        out, soft = trn.mixup(imgs, labels, 0.2, StubRng(beta=1.0))
        assert np.array_equal(out, imgs)
        assert np.array_equal(soft, labels)

    def test_half_lambda_mutual_pair_averages(self):
        imgs = np.stack([np.zeros((1, 2, 2)), np.ones((1, 2, 2))])
        labels = trn.one_hot(np.array([0, 1]), 2)
        out, soft = trn.mixup(imgs, labels, 0.2, StubRng(beta=0.5, perm=[1, 0]))
        assert np.allclose(out[0], 0.5) and np.allclose(out[1], 0.5)
        assert np.allclose(soft, 0.5)

    def test_soft_labels_are_distributions(self):
        rng = np.random.default_rng(3)
        imgs = rng.uniform(size=(16, 1, 4, 4))
        labels = trn.one_hot(rng.integers(0, 7, 16), 7)
        for _ in range(1000):
            _, soft = trn.mixup(imgs, labels, 0.2, rng)
            assert np.all(soft >= 0)
            assert np.abs(soft.sum(axis=1) - 1.0).max() <= 1e-6

    def test_small_batch_rejected(self):
        with pytest.raises(Exception):
            trn.mixup(np.ones((1, 1, 2, 2)), np.ones((1, 2)), 0.2, RNG)


class TestCutmix:
    def test_lambda_one_keeps_batch(self):
        imgs = RNG.uniform(size=(2, 3, 8, 8))
        labels = trn.one_hot(np.array([0, 1]), 3)
        out, soft = trn.cutmix(imgs, labels, 0.4, StubRng(beta=1.0, center=(4, 4)))
        assert np.array_equal(out, imgs)
        assert np.array_equal(soft, labels)

    def test_full_box_replaces_sample(self):
        imgs = np.stack([np.zeros((1, 8, 8)), np.ones((1, 8, 8))])
        labels = trn.one_hot(np.array([0, 1]), 2)
        out, soft = trn.cutmix(imgs, labels, 0.4, StubRng(beta=0.0, perm=[1, 0], center=(4, 4)))
        assert np.array_equal(out[0], np.ones((1, 8, 8)))
        assert np.array_equal(soft[0], labels[1])

    def test_label_weight_equals_pasted_fraction(self):
        rng = np.random.default_rng(8)
        imgs = np.stack([np.zeros((1, 16, 16)), np.ones((1, 16, 16))])
        labels = trn.one_hot(np.array([0, 1]), 2)
        for _ in range(200):
            out, soft = trn.cutmix(imgs, labels, 0.4, rng)
            # partner pixels are exactly 1 where pasted into image 0
            pasted = int(np.count_nonzero(out[0]))
            assert soft[0, 1] == pasted / 256
            assert soft[0, 0] == 1.0 - pasted / 256


def tiny_setup(num_samples=8, seed=0, **cfg_kwargs):
    cfg = md.ModelConfig(image_size=8, patch_size=2, dim=8, depth=1, expansion=2, num_classes=4)
    model = md.init_model(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    images = rng.uniform(-1, 1, (num_samples, 3, 8, 8))
    labels = rng.integers(0, 4, num_samples)
    tcfg = trn.TrainConfig(**cfg_kwargs)
    state = trn.AdamWState.initialize(model.named_parameters())
    return model, images, labels, tcfg, state


class TestTrainEpoch:
    def test_same_seed_gives_identical_loss_sequences(self):
        def run():
            model, images, labels, cfg, state = tiny_setup(
                num_samples=12, seed=2, epochs=3, warmup_epochs=1, batch_size=4
            )
            return [
                trn.train_epoch(model, (images, labels), state, cfg, epoch)["train_loss"]
                for epoch in range(3)
            ]

        assert run() == run()

    def test_three_step_parameter_trajectory_bit_identical(self):
        def params_after():
            model, images, labels, cfg, state = tiny_setup(
                num_samples=12, seed=5, epochs=3, warmup_epochs=1, batch_size=4
            )
            for epoch in range(1):
                trn.train_epoch(model, (images, labels), state, cfg, epoch)
            return {k: v.data.copy() for k, v in model.named_parameters().items()}

        a, b = params_after(), params_after()
        for name in a:
            assert np.array_equal(a[name], b[name]), name

    def test_vanishing_lr_and_no_augmentation_keep_loss_constant(self):
        # base_lr must be positive; 1e-300 underflows every update to zero,
        # so parameters cannot move and each full batch sees the same loss.
        model, images, labels, cfg, state = tiny_setup(
            num_samples=8, seed=1, epochs=4, warmup_epochs=0,
            base_lr=1e-300, weight_decay=0.0, mixup_alpha=0.0, cutmix_alpha=0.0,
            batch_size=8,
        )
        losses = [
            trn.train_epoch(model, (images, labels), state, cfg, epoch)["train_loss"]
            for epoch in range(4)
        ]
        assert losses.count(losses[0]) == len(losses)

    def test_fifty_full_batch_steps_halve_the_loss(self):
        model, images, labels, cfg, state = tiny_setup(
            num_samples=8, seed=3, epochs=50, warmup_epochs=3,
            mixup_alpha=0.0, cutmix_alpha=0.0, batch_size=8,
        )
        losses = [
            trn.train_epoch(model, (images, labels), state, cfg, epoch)["train_loss"]
            for epoch in range(50)
        ]
        assert losses[-1] <= 0.5 * losses[0]

    def test_non_finite_loss_aborts_with_batch_index(self):
        model, images, labels, cfg, state = tiny_setup(
            num_samples=4, seed=0, epochs=2, warmup_epochs=1,
            mixup_alpha=0.0, cutmix_alpha=0.0, batch_size=4,
        )
        model.head.bias.data[0] = np.inf
        with pytest.raises(NumericsError, match="batch 0"):
            trn.train_epoch(model, (images, labels), state, cfg, 0)


class TestEvaluateTop1:
    def _constant_model(self, winning_class):
        cfg = md.ModelConfig(image_size=8, patch_size=2, dim=8, depth=1, num_classes=4)
        model = md.init_model(cfg, seed=0)
        model.head.weight.data[:] = 0.0
        model.head.bias.data[:] = 0.0
        model.head.bias.data[winning_class] = 1.0
        return model

    def test_constant_predictor_scores_chance_on_balanced_set(self):
        model = self._constant_model(2)
        images = RNG.uniform(size=(40, 3, 8, 8))
        labels = np.tile(np.arange(4), 10)
        assert trn.evaluate_top1(model, (images, labels)) == pytest.approx(0.25)

    def test_perfect_oracle_scores_one(self):
        cfg = md.ModelConfig(image_size=8, patch_size=2, dim=8, depth=1, num_classes=4)
        model = md.init_model(cfg, seed=7)
        images = RNG.uniform(size=(20, 3, 8, 8))
        with ag.no_grad():
            labels = md.model_forward(Tensor(images), model).data.argmax(axis=1)
        assert trn.evaluate_top1(model, (images, labels)) == 1.0

    def test_invariant_under_positive_rescaling(self):
        cfg = md.ModelConfig(image_size=8, patch_size=2, dim=8, depth=1, num_classes=4)
        model = md.init_model(cfg, seed=7)
        images = RNG.uniform(size=(30, 3, 8, 8))
        labels = RNG.integers(0, 4, 30)
        before = trn.evaluate_top1(model, (images, labels))
        model.head.weight.data *= 5.0
        model.head.bias.data *= 5.0
        assert trn.evaluate_top1(model, (images, labels)) == before

    def test_ties_break_to_lowest_class_index(self):
        model = self._constant_model(1)
        model.head.bias.data[:] = 0.0  # all logits equal -> argmax 0
        images = RNG.uniform(size=(8, 3, 8, 8))
        assert trn.evaluate_top1(model, (images, np.zeros(8, dtype=np.int64))) == 1.0
