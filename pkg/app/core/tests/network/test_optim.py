import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidConfig, ShapeMismatch
from network import gradcheck
from network.model import ModelConfig, model_backward, model_forward, model_init
from network.optim import (
    Optimizer, OptimState, adam_step, clip_grad_norm, global_norm, mse_loss, sgd_step,
)
from network.tensor import Rng, float64_mode


def scalar(value):
    return {'theta': np.array([value], dtype=np.float64)}


def grad(value):
    return {'theta': np.array([value], dtype=np.float64)}


class MseLossTests(SimpleTestCase):

    def test_value_and_gradient(self):
        """Test loss and gradient of a two-element pair"""
        loss, d_pred = mse_loss(np.array([1.0, 2.0]), np.array([1.0, 4.0]))
        self.assertEqual(loss.value, 2.0)
        self.assertEqual(loss.n, 2)
        np.testing.assert_array_equal(d_pred, [0.0, -2.0])

    def test_identical_inputs(self):
        """Test zero loss and zero gradient"""
        x = Rng(0).uniform_array((1, 1, 3, 3))
        loss, d_pred = mse_loss(x, x.copy())
        self.assertEqual(loss.value, 0.0)
        self.assertFalse(np.any(d_pred))

    def test_shape_mismatch(self):
        """Test mismatched shapes are refused"""
        with self.assertRaises(ShapeMismatch):
            mse_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))

    def test_symmetric_and_matches_scalar_loop(self):
        """Test symmetry and an elementwise reference"""
        rng = Rng(1)
        a = rng.uniform_array((2, 1, 3, 4), dtype=np.float64)
        b = rng.uniform_array((2, 1, 3, 4), dtype=np.float64)
        reference = sum((p - t) ** 2 for p, t in zip(a.ravel(), b.ravel())) / a.size
        self.assertAlmostEqual(mse_loss(a, b)[0].value, reference, places=14)
        self.assertAlmostEqual(mse_loss(a, b)[0].value, mse_loss(b, a)[0].value, places=15)

    def test_gradient_matches_finite_differences(self):
        """Test the loss gradient on seeded random cases"""
        with float64_mode():
            for seed in range(20):
                rng = Rng(seed)
                pred = rng.normal_array((2, 1, 4, 4))
                target = rng.normal_array((2, 1, 4, 4))
                report = gradcheck.check_mse(pred, target, tolerance=1e-5)
                self.assertTrue(report.passed, f'seed {seed}')


class SgdTests(SimpleTestCase):

    def test_scalar_step(self):
        """Test theta - lr * g"""
        params = sgd_step(scalar(1.0), grad(0.5), OptimState(kind='sgd', lr=0.1))
        self.assertAlmostEqual(float(params['theta'][0]), 0.95, places=15)

    def test_fixed_points(self):
        """Test a zero gradient or a zero rate leaves theta"""
        self.assertEqual(sgd_step(scalar(1.0), grad(0.0), OptimState(kind='sgd', lr=0.1))['theta'][0], 1.0)
        self.assertEqual(sgd_step(scalar(1.0), grad(3.0), OptimState(kind='sgd', lr=0.0))['theta'][0], 1.0)

    def test_updates_in_place(self):
        """Test the caller's arrays are the ones updated"""
        params = scalar(1.0)
        theta = params['theta']
        sgd_step(params, grad(1.0), OptimState(kind='sgd', lr=0.5))
        self.assertEqual(theta[0], 0.5)

    def test_shape_mismatch(self):
        """Test a gradient of the wrong shape"""
        with self.assertRaises(ShapeMismatch):
            sgd_step(scalar(1.0), {'theta': np.zeros(2)}, OptimState(kind='sgd'))

    def test_one_step_decreases_loss(self):
        """Test a small SGD step lowers the loss on the same batch"""
        with float64_mode():
            rng = Rng(21)
            model = model_init(ModelConfig(feat_channels=4, mapping_layers=1), rng)
            lr_batch = rng.uniform_array((2, 1, 6, 6))
            hr_batch = rng.uniform_array((2, 1, 12, 12))
            sr, cache = model_forward(model, lr_batch, 'train')
            before, d_sr = mse_loss(sr, hr_batch)
            grads = model_backward(model, cache, d_sr)
            Optimizer(OptimState(kind='sgd', lr=1e-5)).step(model, grads)
            after, _ = mse_loss(model_forward(model, lr_batch, 'train')[0], hr_batch)
        self.assertLess(after.value, before.value)


class AdamTests(SimpleTestCase):

    def test_first_step(self):
        """Test the bias-corrected first step moves by about lr"""
        params = adam_step(scalar(0.0), grad(1.0), OptimState(lr=1e-4))
        self.assertAlmostEqual(float(params['theta'][0]), -9.9999999e-5, places=12)

    def test_zero_gradient_fixed_point(self):
        """Test zero moments and a zero gradient leave theta"""
        params = adam_step(scalar(0.25), grad(0.0), OptimState(lr=1e-3))
        self.assertEqual(params['theta'][0], 0.25)

    def test_two_step_recurrence(self):
        """Test two steps against the scalar recurrence"""
        state = OptimState(lr=1e-2, beta1=0.9, beta2=0.999, eps_adam=1e-8)
        params = scalar(1.0)
        theta, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate([0.5, -2.0], start=1):
            adam_step(params, grad(g), state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta -= 1e-2 * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        self.assertEqual(state.t, 2)
        self.assertAlmostEqual(float(params['theta'][0]), theta, places=12)

    def test_no_nan_under_random_gradients(self):
        """Test ten thousand steps with wild gradient magnitudes stay finite"""
        rng = Rng(5)
        state = OptimState(lr=1e-3)
        params = {'theta': np.zeros(8, dtype=np.float32)}
        for step in range(10000):
            magnitude = 10.0 ** (rng.integers(0, 13) - 6)
            g = rng.normal_array((8,), std=magnitude, dtype=np.float32)
            if step % 7 == 0:
                g[...] = 0.0
            adam_step(params, {'theta': g}, state)
        self.assertTrue(np.all(np.isfinite(params['theta'])))
        self.assertTrue(np.all(np.isfinite(state.v['theta'])))

    def test_invalid_state(self):
        """Test optimizer kind and beta ranges"""
        with self.assertRaises(InvalidConfig):
            OptimState(kind='rmsprop')
        with self.assertRaises(InvalidConfig):
            OptimState(beta1=1.0)

    def test_moments_round_trip(self):
        """Test moment buffers can be exported and restored"""
        state = OptimState(lr=1e-3)
        adam_step(scalar(0.0), grad(2.0), state)
        optimizer = Optimizer(state)
        restored = Optimizer(OptimState(lr=1e-3))
        restored.load_moments(optimizer.moments(), state.t)
        self.assertEqual(restored.state.t, 1)
        np.testing.assert_array_equal(restored.state.m['theta'], state.m['theta'])
        np.testing.assert_array_equal(restored.state.v['theta'], state.v['theta'])


class ClipTests(SimpleTestCase):

    def test_clip_rescales_jointly(self):
        """Test the global norm is capped and directions kept"""
        grads = {'a': np.array([3.0]), 'b': np.array([4.0])}
        self.assertEqual(global_norm(grads), 5.0)
        self.assertEqual(clip_grad_norm(grads, 1.0), 5.0)
        self.assertAlmostEqual(global_norm(grads), 1.0, places=9)
        self.assertAlmostEqual(float(grads['a'][0] / grads['b'][0]), 0.75, places=12)

    def test_clip_below_threshold(self):
        """Test gradients under the cap are untouched"""
        grads = {'a': np.array([0.3, 0.4])}
        clip_grad_norm(grads, 1.0)
        np.testing.assert_array_equal(grads['a'], [0.3, 0.4])
