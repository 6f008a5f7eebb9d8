import math
from unittest import mock

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from reclab.baselines import initial_factors, mf_train
from reclab.ingest import generate_zipf
from reclab.models import ContextSample, FactorModel, TrainConfig
from reclab.tests.utils import make_dataset
from reclab.zeroshot import (
    TrainStats,
    ZeroShotAlgo,
    dotmat_full_step,
    dotmat_step,
    dotmat_train,
    hybrid_train,
    poissonmat_coefficient,
    poissonmat_step,
    poissonmat_train,
    powermat_step,
    powermat_train,
    train_zero_shot,
    zeromat_step,
    zeromat_train,
    zeroshot_predict,
)

ONE = np.array([1.0])


def context_samples(n_users=6, n_items=5, seed=0):
    rng = np.random.default_rng(seed)
    return [
        ContextSample(u, i, int(rng.integers(1, 6)), (float(rng.integers(0, 4)), float(rng.integers(0, 3))))
        for u in range(n_users) for i in range(n_items) if rng.random() < 0.6
    ]


class UpdateRuleTests(SimpleTestCase):
    def test_zeromat_single_step(self):
        u, v = zeromat_step(ONE, ONE, 0.1, 1e-6)
        self.assertAlmostEqual(u[0], 0.9, delta=1e-12)
        self.assertAlmostEqual(v[0], 0.9, delta=1e-12)

    def test_dotmat_fixed_point_at_one(self):
        u, v = dotmat_step(ONE, ONE, 0.3, 1e-6, 10.0)
        self.assertEqual(u.tolist(), [1.0])
        self.assertEqual(v.tolist(), [1.0])

    def test_dotmat_step_at_one_half(self):
        gamma = 0.1
        u, _ = dotmat_step(np.array([0.5]), ONE, gamma, 1e-6, 10.0)
        expected = -gamma * math.sqrt(0.5) * (1.0 + math.log(0.5))
        self.assertAlmostEqual(u[0] - 0.5, expected, delta=1e-12)
        self.assertAlmostEqual((u[0] - 0.5) / gamma, -0.21700, places=4)

    def test_dotmat_caps_large_products(self):
        stats = TrainStats()
        u, _ = dotmat_step(np.array([100.0]), ONE, 1e-12, 1e-6, 10.0, stats)
        self.assertTrue(np.isfinite(u).all())
        self.assertEqual(stats.updates, 1)

    def test_dotmat_full_rule_target(self):
        # with R / R_max = p ** p the sign term vanishes
        u, _ = dotmat_full_step(ONE, ONE, 5, 5, 0.2, 1e-6, 10.0)
        self.assertEqual(u.tolist(), [1.0])

    def test_poissonmat_coefficient(self):
        self.assertEqual(poissonmat_coefficient(1.0), 1.0)
        self.assertAlmostEqual(poissonmat_coefficient(math.e), 1.0 + 1.0 / math.e, delta=1e-12)

    def test_poissonmat_step_at_one(self):
        gamma = 0.05
        u, v = poissonmat_step(np.array([1.0, 0.0]), np.array([1.0, 0.0]), gamma, 1e-6)
        self.assertAlmostEqual(u[0], 1.0 - gamma, delta=1e-12)
        self.assertAlmostEqual(v[0], 1.0 - gamma, delta=1e-12)

    def test_powermat_beta_step(self):
        gamma = 0.01
        _, _, _, beta = powermat_step(ONE, np.array([2.0]), np.array([0.3]), 0.7, ONE, gamma, 1.0, 1.0, 1e-6)
        self.assertAlmostEqual(beta, 0.7 - 4 * gamma, delta=1e-12)

    def test_powermat_alpha_step(self):
        gamma = 0.01
        _, _, alpha, _ = powermat_step(ONE, np.array([2.0]), np.array([0.3, 0.1]), 0.7,
                                       np.array([1.0, 3.0]), gamma, 1.0, 1.0, 1e-6)
        self.assertTrue(np.allclose(alpha, [0.3 - 2 * gamma, 0.1 - 6 * gamma], atol=1e-12, rtol=0))

    def test_floor_counts_clamps(self):
        stats = TrainStats()
        zeromat_step(np.array([-1.0]), ONE, 0.0, 1e-6, stats)
        self.assertEqual((stats.clamp_activations, stats.smallest_argument), (1, 1e-6))


class ZeroShotTrainerTests(SimpleTestCase):
    cfg = TrainConfig(k=3, epochs=4, seed=7, samples_per_epoch=40)

    def initial(self, n_users, n_items, cfg):
        rng = np.random.default_rng(cfg.seed)
        return FactorModel(initial_factors(rng, n_users, cfg), initial_factors(rng, n_items, cfg))

    def test_zero_step_keeps_initialization(self):
        cfg = TrainConfig(gamma=0.0, k=3, epochs=3, seed=2, samples_per_epoch=25)
        for algo in ZeroShotAlgo:
            with self.subTest(algo=algo):
                self.assertTrue(train_zero_shot(algo, 8, 6, cfg).same_as(self.initial(8, 6, cfg)))

    def test_equal_seeds_give_identical_models(self):
        for algo in ZeroShotAlgo:
            with self.subTest(algo=algo):
                self.assertTrue(train_zero_shot(algo, 9, 7, self.cfg).same_as(train_zero_shot(algo, 9, 7, self.cfg)))

    def test_models_depend_only_on_grid_and_config(self):
        first = generate_zipf(9, 7, 30, seed=1)
        second = first.with_values(np.full(len(first), 2))
        for algo in ZeroShotAlgo:
            with self.subTest(algo=algo):
                a = train_zero_shot(algo, first.n_users, first.n_items, self.cfg)
                b = train_zero_shot(algo, second.n_users, second.n_items, self.cfg)
                self.assertTrue(a.same_as(b))

    def test_trainers_move_the_factors(self):
        model = zeromat_train(9, 7, self.cfg)
        self.assertFalse(model.same_as(self.initial(9, 7, self.cfg)))

    def test_every_argument_respects_the_floor(self):
        stats = TrainStats()
        dotmat_train(9, 7, self.cfg, stats)
        self.assertEqual(stats.updates, self.cfg.epochs * self.cfg.samples_per_epoch)
        self.assertGreaterEqual(stats.smallest_argument, self.cfg.eps_floor)

    def test_samples_per_epoch_is_required(self):
        with self.assertRaises(ValidationError):
            poissonmat_train(9, 7, TrainConfig())

    def test_zeromat_settles_near_one_half(self):
        cfg = TrainConfig(gamma=0.01, k=1, epochs=200, seed=0, samples_per_epoch=10)
        model = zeromat_train(1, 1, cfg)
        self.assertAlmostEqual(model.dot(0, 0), 0.5, delta=1e-3)


class PowerMatTests(SimpleTestCase):
    cfg = TrainConfig(gamma=1e-3, k=3, epochs=3, seed=4)

    def test_ratings_are_never_read(self):
        contexts = context_samples()
        rerated = [sample._replace(value=1 + (sample.value % 5)) for sample in contexts]
        self.assertTrue(powermat_train(contexts, self.cfg).same_as(powermat_train(rerated, self.cfg)))

    def test_sample_order_is_irrelevant(self):
        contexts = context_samples()
        reordered = list(reversed(contexts))
        self.assertTrue(powermat_train(contexts, self.cfg).same_as(powermat_train(reordered, self.cfg)))

    def test_zero_step_keeps_initialization(self):
        cfg = TrainConfig(gamma=0.0, k=3, epochs=2, seed=4)
        contexts = context_samples()
        model = powermat_train(contexts, cfg, n_users=6, n_items=5)
        rng = np.random.default_rng(cfg.seed)
        U, V = initial_factors(rng, 6, cfg), initial_factors(rng, 5, cfg)
        alpha = cfg.init_lo * rng.uniform(0.5, 1.0, size=2)
        self.assertTrue(model.factors.same_as(FactorModel(U, V)))
        self.assertTrue(np.array_equal(model.alpha, alpha))
        self.assertEqual(model.beta, cfg.init_lo)

    def test_context_dimension_mismatch(self):
        contexts = [ContextSample(0, 0, 3, (1.0, 2.0)), ContextSample(1, 0, 4, (1.0,))]
        with self.assertRaises(ValidationError):
            powermat_train(contexts, self.cfg)

    def test_alpha_matches_context_dimension(self):
        self.assertEqual(powermat_train(context_samples(), self.cfg).context_dim, 2)


class ZeroShotPredictTests(SimpleTestCase):
    def setUp(self):
        self.model = FactorModel([[1.0], [3.0]], [[2.0], [1.0], [2.0]])

    def test_row_maximum_predicts_r_max(self):
        self.assertEqual(zeroshot_predict(self.model, 0, 0, 5), 5.0)

    def test_half_of_row_maximum(self):
        self.assertEqual(zeroshot_predict(self.model, 0, 1, 5), 2.5)

    def test_flat_row(self):
        flat = FactorModel([[1.0]], [[0.4], [0.4], [0.4]])
        self.assertEqual([zeroshot_predict(flat, 0, i, 5) for i in range(3)], [5.0, 5.0, 5.0])

    def test_output_stays_on_scale(self):
        model = FactorModel(np.random.default_rng(1).normal(size=(4, 2)), np.random.default_rng(2).normal(size=(6, 2)))
        for u in range(4):
            for i in range(6):
                self.assertTrue(1.0 <= zeroshot_predict(model, u, i, 5) <= 5.0)


class HybridTests(SimpleTestCase):
    def setUp(self):
        self.train = generate_zipf(20, 15, 60, seed=5)
        self.cfg = TrainConfig(k=3, epochs=3, seed=9)

    def test_augmented_size(self):
        with mock.patch('reclab.zeroshot.mf_train', wraps=mf_train) as spy:
            hybrid_train(self.train, ZeroShotAlgo.ZEROMAT, self.cfg, fill_fraction=0.5)
        augmented = spy.call_args[0][0]
        self.assertEqual(len(augmented), len(self.train) + round(0.5 * len(self.train)))
        filled = set(augmented.cell_keys().tolist()) - set(self.train.cell_keys().tolist())
        self.assertEqual(len(filled), 30)

    def test_vanishing_fill_is_plain_mf(self):
        model = hybrid_train(self.train, 'dotmat', self.cfg, fill_fraction=1e-9)
        self.assertTrue(model.same_as(mf_train(self.train, self.cfg)))

    def test_fill_fraction_range(self):
        with self.assertRaises(ValidationError):
            hybrid_train(self.train, 'zeromat', self.cfg, fill_fraction=0.0)

    def test_separate_zero_shot_config(self):
        slow = self.cfg.with_samples(10)
        with mock.patch('reclab.zeroshot.train_zero_shot', wraps=train_zero_shot) as spy:
            hybrid_train(self.train, 'poissonmat', self.cfg, zero_cfg=slow)
        self.assertEqual(spy.call_args[0][3], slow)

    def test_empty_training_set(self):
        with self.assertRaises(ValidationError):
            hybrid_train(make_dataset([], n_users=2, n_items=2), 'zeromat', self.cfg)

    def test_dense_grid_fills_every_open_cell(self):
        # 15 de 20 células observadas: só sobram 5 para preencher
        dense = generate_zipf(4, 5, 15, seed=1)
        with mock.patch('reclab.zeroshot.mf_train', wraps=mf_train) as spy:
            hybrid_train(dense, 'dotmat', self.cfg, fill_fraction=1.0)
        augmented = spy.call_args[0][0]
        self.assertEqual(len(augmented), 20)
        self.assertEqual(len(set(augmented.cell_keys().tolist())), 20)
