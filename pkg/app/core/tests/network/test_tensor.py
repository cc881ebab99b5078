import json
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidShape, ShapeMismatch
from network.tensor import (
    Rng, col2im, default_dtype, elementwise, float64_mode, full, im2col,
)

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


def sample_image(shape, seed=0):
    return Rng(seed).uniform_array(shape, -1.0, 1.0, dtype=np.float64)


def membership_count(shape, kernel, stride, pad):
    """Brute-force number of windows covering every input position"""
    n, c, h, w = shape
    kh, kw = kernel
    counts = np.zeros(shape)
    for top in range(-pad, h + pad - kh + 1, stride):
        for left in range(-pad, w + pad - kw + 1, stride):
            for u in range(kh):
                for v in range(kw):
                    i, j = top + u, left + v
                    if 0 <= i < h and 0 <= j < w:
                        counts[:, :, i, j] += 1
    return counts


class TensorTests(SimpleTestCase):

    def test_full_fills_every_element(self):
        """Test constant fill"""
        np.testing.assert_array_equal(full((1, 1, 2, 2), 0.0), np.zeros((1, 1, 2, 2)))
        np.testing.assert_array_equal(full((1, 2, 1, 1), 1.5).ravel(), [1.5, 1.5])

    def test_full_rejects_zero_dimension(self):
        """Test that a zero dimension is refused"""
        with self.assertRaises(InvalidShape):
            full((1, 0, 2, 2), 0.0)

    def test_elementwise_ops(self):
        """Test add, scale and sub"""
        a = np.array([1.0, 2.0])
        np.testing.assert_array_equal(elementwise('add', a, np.array([3.0, 4.0])), [4.0, 6.0])
        np.testing.assert_array_equal(elementwise('scale', a, 0), [0.0, 0.0])
        np.testing.assert_array_equal(elementwise('sub', a, a), [0.0, 0.0])

    def test_elementwise_shape_mismatch(self):
        """Test that operands of different shapes are refused"""
        with self.assertRaises(ShapeMismatch):
            elementwise('add', np.zeros(2), np.zeros(3))

    def test_elementwise_leaves_inputs_alone(self):
        """Test that operations never write into their inputs"""
        a = np.array([1.0, 2.0])
        elementwise('mul', a, a)
        np.testing.assert_array_equal(a, [1.0, 2.0])

    def test_float64_mode(self):
        """Test that the dtype switch is scoped to the block"""
        self.assertEqual(default_dtype(), np.float32)
        with float64_mode():
            self.assertEqual(full((1, 1, 1, 1)).dtype, np.float64)
        self.assertEqual(full((1, 1, 1, 1)).dtype, np.float32)


class Im2colTests(SimpleTestCase):

    def test_unit_kernel_is_identity_layout(self):
        """Test a 1x1 kernel unfolds to the flattened image"""
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        np.testing.assert_array_equal(im2col(x, (1, 1)), [[1.0, 2.0, 3.0, 4.0]])

    def test_padded_window(self):
        """Test the column of output (0, 0) for a padded 3x3 kernel"""
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        cols = im2col(x, (3, 3), stride=1, pad=1)
        self.assertEqual(cols.shape, (9, 4))
        np.testing.assert_array_equal(cols[:, 0], [0, 0, 0, 0, 1, 2, 0, 3, 4])

    def test_non_integral_output(self):
        """Test that a window which does not tile the image is refused"""
        with self.assertRaises(InvalidShape):
            im2col(np.zeros((1, 1, 3, 3)), (2, 2), stride=2, pad=0)

    def test_fold_counts_patch_membership(self):
        """Test col2im(im2col(x)) multiplies x by its window count"""
        cases = [
            ((2, 3, 5, 5), (3, 3), 1, 1),
            ((1, 2, 4, 6), (2, 2), 2, 0),
            ((1, 1, 7, 7), (3, 3), 2, 1),
            ((1, 1, 4, 4), (1, 1), 1, 0),
        ]
        for seed, (shape, kernel, stride, pad) in enumerate(cases):
            x = sample_image(shape, seed)
            folded = col2im(im2col(x, kernel, stride, pad), shape, kernel, stride, pad)
            np.testing.assert_allclose(folded, x * membership_count(shape, kernel, stride, pad), atol=1e-12)

    def test_col2im_shape_mismatch(self):
        """Test that a column matrix of the wrong size is refused"""
        with self.assertRaises(ShapeMismatch):
            col2im(np.zeros((9, 3)), (1, 1, 2, 2), (3, 3), 1, 1)


class RngTests(SimpleTestCase):

    def setUp(self):
        self.fixture = json.loads((FIXTURES / 'rng_seed42.json').read_text())

    def test_seed_42_stream(self):
        """Test the first sixteen draws against the committed fixture"""
        rng = Rng(self.fixture['seed'])
        self.assertEqual([rng.next_u64() for _ in range(16)], self.fixture['u64'])

    def test_seed_42_uniforms(self):
        """Test that uniforms use the top 53 bits of each draw"""
        rng = Rng(self.fixture['seed'])
        self.assertEqual([rng.uniform() for _ in range(4)], self.fixture['uniform'])

    def test_same_seed_same_arrays(self):
        """Test that arrays drawn with one seed are bitwise equal"""
        a = Rng(3).normal_array((4, 5), std=0.5)
        b = Rng(3).normal_array((4, 5), std=0.5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, Rng(4).normal_array((4, 5), std=0.5)))

    def test_uniform_range(self):
        """Test uniform draws stay in [0, 1)"""
        rng = Rng(9)
        values = [rng.uniform() for _ in range(2000)]
        self.assertGreaterEqual(min(values), 0.0)
        self.assertLess(max(values), 1.0)

    def test_normal_moments(self):
        """Test Box-Muller draws have roughly unit variance"""
        values = Rng(11).normal_array((20000,), dtype=np.float64)
        self.assertAlmostEqual(float(values.mean()), 0.0, delta=0.05)
        self.assertAlmostEqual(float(values.std()), 1.0, delta=0.05)

    def test_integers_and_shuffle(self):
        """Test bounded integers and a deterministic permutation"""
        rng = Rng(1)
        self.assertTrue(all(3 <= rng.integers(3, 7) < 7 for _ in range(100)))
        with self.assertRaises(ValueError):
            rng.integers(2, 2)
        items = list(range(10))
        self.assertEqual(sorted(Rng(5).shuffle(items[:])), items)
        self.assertEqual(Rng(5).shuffle(items[:]), Rng(5).shuffle(items[:]))
