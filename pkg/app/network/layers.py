"""Forward and backward passes for convolution, ReLU, batch normalization
and pixel shuffle.

Every forward returns ``(output, cache)``; the matching backward consumes
the cache and returns a ``LayerGrads``. Parameters are never modified by a
pass except the running statistics of a train-mode batch normalization.
"""
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from core.exceptions import InvalidShape, InvalidState, ShapeMismatch
from network.tensor import col2im, im2col


@dataclass
class ConvParams:
    """Convolution kernel (out_c, in_c, kh, kw), bias (out_c,), stride and zero padding"""
    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        if self.weight.ndim != 4:
            raise InvalidShape(f'conv weight must be rank 4, got {self.weight.shape}')
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatch(f'bias {self.bias.shape} for {self.weight.shape[0]} output channels')

    @property
    def in_channels(self):
        return self.weight.shape[1]

    @property
    def out_channels(self):
        return self.weight.shape[0]

    @property
    def kernel(self):
        return self.weight.shape[2:]

    @classmethod
    def same(cls, weight, bias):
        """Stride 1 convolution whose output keeps the input size"""
        kh, kw = weight.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0 or kh != kw:
            raise InvalidShape(f'same padding needs a square odd kernel, got {kh}x{kw}')
        return cls(weight, bias, stride=1, pad=(kh - 1) // 2)


@dataclass
class BatchNormParams:
    """Per-channel scale and shift with the running moments used at inference"""
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError('batchnorm eps must be positive')
        if not 0 < self.momentum < 1:
            raise ValueError('batchnorm momentum must lie in (0, 1)')
        if np.any(self.running_var < 0):
            raise ValueError('running variance must be non-negative')

    @classmethod
    def identity(cls, channels, dtype=np.float32, **kwargs):
        return cls(
            gamma=np.ones(channels, dtype=dtype),
            beta=np.zeros(channels, dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            **kwargs,
        )


@dataclass
class LayerGrads:
    """Gradients of one layer; d_weight/d_bias hold gamma/beta for batchnorm"""
    d_input: np.ndarray
    d_weight: Optional[np.ndarray] = None
    d_bias: Optional[np.ndarray] = None


@dataclass
class ConvCache:
    params: ConvParams
    x_shape: tuple
    cols: np.ndarray
    out_shape: tuple


@dataclass
class BatchNormCache:
    params: BatchNormParams
    mode: str
    x_hat: Any
    inv_std: Any
    out_shape: tuple


def conv2d_forward(x, p):
    """y[n,o,i,j] = b[o] + sum W[o,c,u,v] * x_padded[n,c,i*s+u,j*s+v]"""
    if x.shape[1] != p.in_channels:
        raise ShapeMismatch(f'input has {x.shape[1]} channels, kernel expects {p.in_channels}')
    n = x.shape[0]
    cols = im2col(x, p.kernel, p.stride, p.pad)
    oh_ow = cols.shape[1] // n
    out = p.weight.reshape(p.out_channels, -1) @ cols + p.bias[:, None]
    oh = (x.shape[2] + 2 * p.pad - p.kernel[0]) // p.stride + 1
    ow = oh_ow // oh
    y = out.reshape(p.out_channels, n, oh, ow).transpose(1, 0, 2, 3)
    y = np.ascontiguousarray(y)
    return y, ConvCache(p, x.shape, cols, y.shape)


def conv2d_backward(d_y, cache):
    if d_y.shape != cache.out_shape:
        raise ShapeMismatch(f'upstream gradient {d_y.shape} vs output {cache.out_shape}')
    p = cache.params
    d_out = d_y.transpose(1, 0, 2, 3).reshape(p.out_channels, -1)
    d_weight = (d_out @ cache.cols.T).reshape(p.weight.shape)
    d_bias = d_out.sum(axis=1)
    d_cols = p.weight.reshape(p.out_channels, -1).T @ d_out
    d_input = col2im(d_cols, cache.x_shape, p.kernel, p.stride, p.pad)
    return LayerGrads(d_input, d_weight, d_bias)


def relu_forward(x):
    mask = x > 0
    return np.where(mask, x, x.dtype.type(0)), mask


def relu_backward(d_y, mask):
    """Route the gradient through positive inputs only (zero at x == 0)"""
    if d_y.shape != mask.shape:
        raise ShapeMismatch(f'upstream gradient {d_y.shape} vs mask {mask.shape}')
    return np.where(mask, d_y, d_y.dtype.type(0))


def _channel_view(v):
    return v.reshape(1, -1, 1, 1)


def batchnorm_forward(x, p, mode='train'):
    """Normalize each channel over (n, h, w)

    Train mode uses biased batch statistics and folds them into the running
    moments; infer mode uses the running moments.
    """
    if x.shape[1] != p.gamma.shape[0]:
        raise ShapeMismatch(f'input has {x.shape[1]} channels, batchnorm expects {p.gamma.shape[0]}')
    if mode == 'train':
        mean = x.mean(axis=(0, 2, 3))
        centered = x - _channel_view(mean)
        var = (centered * centered).mean(axis=(0, 2, 3))
        p.running_mean[...] = (1 - p.momentum) * p.running_mean + p.momentum * mean
        p.running_var[...] = (1 - p.momentum) * p.running_var + p.momentum * var
    elif mode == 'infer':
        centered = x - _channel_view(p.running_mean)
        var = p.running_var
    else:
        raise ValueError(f'unknown mode {mode!r}')
    inv_std = 1 / np.sqrt(var + x.dtype.type(p.eps))
    x_hat = centered * _channel_view(inv_std)
    y = _channel_view(p.gamma) * x_hat + _channel_view(p.beta)
    if mode == 'train':
        return y, BatchNormCache(p, mode, x_hat, inv_std, y.shape)
    return y, BatchNormCache(p, mode, None, None, y.shape)


def batchnorm_backward(d_y, cache):
    """Exact gradients through the batch mean and variance"""
    if cache.mode != 'train':
        raise InvalidState('batchnorm backward needs a train-mode cache')
    if d_y.shape != cache.out_shape:
        raise ShapeMismatch(f'upstream gradient {d_y.shape} vs output {cache.out_shape}')
    p = cache.params
    x_hat = cache.x_hat
    count = d_y.shape[0] * d_y.shape[2] * d_y.shape[3]
    d_beta = d_y.sum(axis=(0, 2, 3))
    d_gamma = (d_y * x_hat).sum(axis=(0, 2, 3))
    d_x_hat = d_y * _channel_view(p.gamma)
    d_input = _channel_view(cache.inv_std / count) * (
        count * d_x_hat
        - _channel_view(d_x_hat.sum(axis=(0, 2, 3)))
        - x_hat * _channel_view((d_x_hat * x_hat).sum(axis=(0, 2, 3)))
    )
    return LayerGrads(d_input, d_gamma, d_beta)


def pixel_shuffle(x, r):
    """Rearrange (n, c*r*r, h, w) into (n, c, h*r, w*r)

    out[n, c, h*r + i, w*r + j] = x[n, c*r*r + i*r + j, h, w]
    """
    n, channels, h, w = x.shape
    if r < 1 or channels % (r * r):
        raise InvalidShape(f'{channels} channels cannot be shuffled by factor {r}')
    c = channels // (r * r)
    out = x.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out).reshape(n, c, h * r, w * r)


def pixel_unshuffle(x, r):
    """Inverse of pixel_shuffle; also its backward pass"""
    n, c, height, width = x.shape
    if r < 1 or height % r or width % r:
        raise InvalidShape(f'{height}x{width} plane cannot be unshuffled by factor {r}')
    h, w = height // r, width // r
    out = x.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out).reshape(n, c * r * r, h, w)
