"""PSNR and SSIM on [0, 1] luminance images."""
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from core.exceptions import InvalidShape, ShapeMismatch
from imaging.color import to_luma

K1 = 0.01
K2 = 0.03
WINDOW = 11
SIGMA = 1.5


def _check_pair(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f'{a.shape} vs {b.shape}')


def mse(a, b):
    _check_pair(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a, b, max_val=1.0):
    """10*log10(max_val**2 / MSE) in dB; identical inputs give math.inf"""
    if max_val <= 0:
        raise ValueError('max_val must be positive')
    error = mse(a, b)
    if error == 0:
        return math.inf
    return 10 * math.log10(max_val * max_val / error)


def gaussian_window(size=WINDOW, sigma=SIGMA):
    """1-D Gaussian taps normalized to sum 1; the 2-D window is their outer product"""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2
    taps = np.exp(-(offsets ** 2) / (2 * sigma * sigma))
    return taps / taps.sum()


def _filter_valid(plane, taps):
    """Separable correlation with no padding"""
    size = taps.shape[0]
    rows = np.lib.stride_tricks.sliding_window_view(plane, size, axis=-1) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, size, axis=-2) @ taps


def ssim_map(a, b, max_val=1.0, size=WINDOW, sigma=SIGMA):
    """Local SSIM for every fully covered window position of two 2-D planes"""
    if a.shape[-2] < size or a.shape[-1] < size:
        raise InvalidShape(f'image {a.shape[-2:]} is smaller than the {size}x{size} window')
    taps = gaussian_window(size, sigma)
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    c1 = (K1 * max_val) ** 2
    c2 = (K2 * max_val) ** 2
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return numerator / denominator


def ssim(a, b, max_val=1.0, size=WINDOW, sigma=SIGMA):
    """Mean SSIM over window positions and images of single-channel tensors"""
    _check_pair(a, b)
    if a.ndim == 4 and a.shape[1] != 1:
        raise InvalidShape(f'ssim expects one channel, got {a.shape[1]}')
    return float(np.mean(ssim_map(a, b, max_val, size, sigma)))


@dataclass
class ImageScore:
    image: str
    psnr_db: float
    ssim: float


@dataclass
class MetricReport:
    method: str = ''
    images: List[ImageScore] = field(default_factory=list)

    def add(self, image, psnr_db, ssim_value):
        self.images.append(ImageScore(image, psnr_db, ssim_value))

    @property
    def mean_psnr(self):
        return float(np.mean([s.psnr_db for s in self.images])) if self.images else math.nan

    @property
    def mean_ssim(self):
        return float(np.mean([s.ssim for s in self.images])) if self.images else math.nan


def crop_border(img, pixels):
    h, w = img.shape[-2:]
    if pixels < 0 or 2 * pixels >= min(h, w):
        raise InvalidShape(f'border crop {pixels} leaves nothing of a {h}x{w} image')
    if pixels == 0:
        return img
    return img[..., pixels:h - pixels, pixels:w - pixels]


def evaluate_pair(sr, hr, border_crop, image='', max_val=1.0):
    """Crop the border, reduce to luma and score one prediction"""
    if sr.shape != hr.shape:
        raise ShapeMismatch(f'prediction {sr.shape} vs reference {hr.shape}')
    sr_y = crop_border(to_luma(sr), border_crop)
    hr_y = crop_border(to_luma(hr), border_crop)
    return ImageScore(image, psnr(sr_y, hr_y, max_val), ssim(sr_y, hr_y, max_val))
