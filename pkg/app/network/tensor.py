"""Rank-4 NCHW tensors, patch unfolding and the seeded random generator.

A tensor is a plain ``numpy.ndarray`` of rank 4 laid out as
(batch, channels, rows, cols). Operations never modify their inputs.
Storage is float32; ``float64_mode()`` switches newly created tensors to
float64 for gradient checking.
"""
import contextlib
import contextvars
import math

import numpy as np

from core.exceptions import InvalidShape, ShapeMismatch

_dtype = contextvars.ContextVar('srres_dtype', default=np.float32)

MASK64 = (1 << 64) - 1


def default_dtype():
    """Return the dtype new tensors are created with"""
    return _dtype.get()


@contextlib.contextmanager
def float64_mode():
    """Create tensors and models in float64 inside the block"""
    token = _dtype.set(np.float64)
    try:
        yield
    finally:
        _dtype.reset(token)


def check_shape(shape):
    """Validate a rank-4 shape and return it as a tuple of ints"""
    shape = tuple(int(d) for d in shape)
    if len(shape) != 4:
        raise InvalidShape(f'expected an NCHW shape, got {shape}')
    if min(shape) < 1:
        raise InvalidShape(f'every dimension must be at least 1, got {shape}')
    return shape


def as_tensor(values, dtype=None):
    """Copy array-like values into a validated tensor"""
    array = np.array(values, dtype=dtype or default_dtype())
    check_shape(array.shape)
    return array


def full(shape, fill=0.0, dtype=None):
    """Return a new tensor with every element equal to fill"""
    return np.full(check_shape(shape), fill, dtype=dtype or default_dtype())


_OPS = {
    'add': np.add,
    'sub': np.subtract,
    'mul': np.multiply,
}


def elementwise(op, a, b):
    """Apply add, sub, mul (tensor operand) or scale (scalar operand)"""
    if op == 'scale':
        return a * a.dtype.type(b)
    if op not in _OPS:
        raise ValueError(f'unknown elementwise op {op!r}')
    if a.shape != b.shape:
        raise ShapeMismatch(f'{op}: {a.shape} vs {b.shape}')
    return _OPS[op](a, b)


def output_size(size, kernel, stride, pad):
    """Return the integral output extent of a sliding window"""
    span = size + 2 * pad - kernel
    if span < 0 or span % stride:
        raise InvalidShape(
            f'window {kernel} stride {stride} pad {pad} does not tile extent {size}'
        )
    return span // stride + 1


def im2col(x, kernel, stride=1, pad=0):
    """Unfold receptive fields into a (c*kh*kw, n*oh*ow) matrix

    Row index is (c, u, v) row-major, column index is (n, i, j) row-major.
    Positions outside the image read as zero.
    """
    kh, kw = kernel
    n, c, h, w = x.shape
    oh = output_size(h, kh, stride, pad)
    ow = output_size(w, kw, stride, pad)
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :oh, :ow]
    # (n, c, oh, ow, kh, kw) -> (c, kh, kw, n, oh, ow)
    cols = windows.transpose(1, 4, 5, 0, 2, 3)
    return np.ascontiguousarray(cols).reshape(c * kh * kw, n * oh * ow)


def col2im(cols, x_shape, kernel, stride=1, pad=0):
    """Fold a column matrix back onto an image, summing overlapping patches"""
    kh, kw = kernel
    n, c, h, w = x_shape
    oh = output_size(h, kh, stride, pad)
    ow = output_size(w, kw, stride, pad)
    if cols.shape != (c * kh * kw, n * oh * ow):
        raise ShapeMismatch(f'column matrix {cols.shape} does not fit image {x_shape}')
    blocks = cols.reshape(c, kh, kw, n, oh, ow).transpose(3, 0, 1, 2, 4, 5)
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for u in range(kh):
        for v in range(kw):
            padded[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += blocks[:, :, u, v]
    return padded[:, :, pad:pad + h, pad:pad + w].copy()


def _splitmix64(value):
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Rng:
    """Seeded xorshift64* generator, identical on every platform

    The seed is scrambled once with splitmix64 to form the 64-bit state.
    Each draw applies ``x ^= x >> 12; x ^= x << 25; x ^= x >> 27`` to the
    state and returns ``x * 0x2545F4914F6CDD1D`` modulo 2**64.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & MASK64
        self.state = _splitmix64(self.seed) or 0x9E3779B97F4A7C15

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self):
        """Float in [0, 1) from the top 53 bits"""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self):
        """Standard normal via Box-Muller"""
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def integers(self, low, high):
        """Integer in [low, high)"""
        if high <= low:
            raise ValueError(f'empty range [{low}, {high})')
        return low + self.next_u64() % (high - low)

    def normal_array(self, shape, std=1.0, dtype=None):
        count = int(np.prod(shape))
        values = np.fromiter((self.normal() for _ in range(count)), dtype=np.float64, count=count)
        return (values * std).reshape(shape).astype(dtype or default_dtype())

    def uniform_array(self, shape, low=0.0, high=1.0, dtype=None):
        count = int(np.prod(shape))
        values = np.fromiter((self.uniform() for _ in range(count)), dtype=np.float64, count=count)
        return (low + (high - low) * values).reshape(shape).astype(dtype or default_dtype())

    def shuffle(self, items):
        """Fisher-Yates shuffle in place"""
        for i in range(len(items) - 1, 0, -1):
            j = self.integers(0, i + 1)
            items[i], items[j] = items[j], items[i]
        return items
