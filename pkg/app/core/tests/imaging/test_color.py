import numpy as np
from django.test import SimpleTestCase

from imaging.color import rgb_to_ycbcr, to_luma, ycbcr_to_rgb
from network.tensor import Rng


class ColorTests(SimpleTestCase):

    def test_round_trip(self):
        """Test RGB -> YCbCr -> RGB"""
        rgb = Rng(0).uniform_array((1, 3, 4, 5), dtype=np.float64)
        np.testing.assert_allclose(ycbcr_to_rgb(rgb_to_ycbcr(rgb)), rgb, atol=1e-5)

    def test_grey_has_neutral_chroma(self):
        """Test grey pixels map to Cb = Cr = 0.5"""
        grey = np.full((1, 3, 2, 2), 0.4)
        ycc = rgb_to_ycbcr(grey)
        np.testing.assert_allclose(ycc[:, 0], 0.4, atol=1e-12)
        np.testing.assert_allclose(ycc[:, 1:], 0.5, atol=1e-12)

    def test_luma(self):
        """Test luma weights and the single-channel passthrough"""
        rgb = np.zeros((1, 3, 1, 1))
        rgb[0, 1] = 1.0
        self.assertAlmostEqual(float(to_luma(rgb)[0, 0, 0, 0]), 0.587)
        y = np.ones((1, 1, 2, 2), dtype=np.float32)
        self.assertIs(to_luma(y), y)
        with self.assertRaises(ValueError):
            to_luma(np.zeros((1, 2, 1, 1)))
