"""Nearest, bilinear and bicubic resampling, and the degradation model.

All modes share the half-pixel-center convention
``src = (dst + 0.5) / scale - 0.5`` and clamp taps that fall outside the
image to the nearest edge pixel. Resampling is separable: one weight matrix
per axis, applied in float64 and cast back to the input dtype.

The degradation that defines "LR" throughout the project is an antialiased
bicubic downscale by exactly 1/r after cropping the HR image to a multiple
of r (extra rows and columns are dropped at the bottom and right).
"""
import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core.exceptions import InvalidShape

logger = logging.getLogger(__name__)

MODES = ('nearest', 'bilinear', 'bicubic')


@dataclass(frozen=True)
class ResampleSpec:
    mode: str = 'bicubic'
    scale: Fraction = Fraction(2)
    a: float = -0.5
    antialias: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f'unknown resample mode {self.mode!r}')
        object.__setattr__(self, 'scale', Fraction(self.scale).limit_denominator(10 ** 6))
        if self.scale <= 0:
            raise ValueError('scale must be positive')


def cubic_kernel(x, a=-0.5):
    """Keys cubic convolution kernel"""
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def linear_kernel(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


def output_extent(size, scale):
    return int(math.floor(size * scale + Fraction(1, 2)))


def weight_matrix(in_size, out_size, spec):
    """(out_size, in_size) float64 matrix mapping one axis"""
    scale = float(spec.scale)
    dst = np.arange(out_size, dtype=np.float64)
    matrix = np.zeros((out_size, in_size), dtype=np.float64)
    if spec.mode == 'nearest':
        src = np.clip(np.floor((dst + 0.5) / scale).astype(np.int64), 0, in_size - 1)
        matrix[np.arange(out_size), src] = 1.0
        return matrix

    if spec.mode == 'bilinear':
        support = 1.0
        kernel = linear_kernel
    else:
        support = 2.0
        kernel = functools.partial(cubic_kernel, a=spec.a)
    stretch = 1.0 / scale if (spec.antialias and scale < 1) else 1.0
    radius = support * stretch
    center = (dst + 0.5) / scale - 0.5
    taps = int(math.ceil(2 * radius)) + 1
    first = np.floor(center - radius).astype(np.int64) + 1
    index = first[:, None] + np.arange(taps)[None, :]
    weights = kernel((index - center[:, None]) / stretch)
    weights /= weights.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(out_size), taps)
    np.add.at(matrix, (rows, np.clip(index, 0, in_size - 1).ravel()), weights.ravel())
    return matrix


def resample(img, spec):
    """Resize the last two axes of an NCHW tensor by spec.scale"""
    n, c, h, w = img.shape
    out_h = output_extent(h, spec.scale)
    out_w = output_extent(w, spec.scale)
    if out_h < 1 or out_w < 1:
        raise InvalidShape(f'{h}x{w} scaled by {spec.scale} leaves no pixels')
    rows = weight_matrix(h, out_h, spec)
    cols = weight_matrix(w, out_w, spec)
    out = rows @ img.astype(np.float64) @ cols.T
    return out.astype(img.dtype)


def crop_to_multiple(img, r):
    """Drop bottom rows and right columns so both sides divide by r"""
    h, w = img.shape[2:]
    return img[:, :, :h - h % r, :w - w % r]


def degrade(hr, r):
    """Antialiased bicubic downscale by exactly 1/r"""
    cropped = crop_to_multiple(hr, r)
    if cropped.shape[2] < 1 or cropped.shape[3] < 1:
        raise InvalidShape(f'image {hr.shape[2:]} is smaller than scale {r}')
    if cropped.shape != hr.shape:
        logger.debug('cropped %s to %s before degrading by %d', hr.shape[2:], cropped.shape[2:], r)
    return resample(cropped, ResampleSpec(mode='bicubic', scale=Fraction(1, r), antialias=True))


def upscale(lr, r, mode='bicubic'):
    return resample(lr, ResampleSpec(mode=mode, scale=r, antialias=False))
