"""Full-range BT.601 luma/chroma conversion on [0, 1] values."""
import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_RGB_TO_YCBCR = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
_YCBCR_TO_RGB = np.array([
    [1.0, 0.0, 1.402],
    [1.0, -0.344136, -0.714136],
    [1.0, 1.772, 0.0],
])
_OFFSET = np.array([0.0, 0.5, 0.5]).reshape(1, 3, 1, 1)


def _mix(matrix, x):
    return np.einsum('oc,nchw->nohw', matrix, x.astype(np.float64))


def rgb_to_ycbcr(rgb):
    return (_mix(_RGB_TO_YCBCR, rgb) + _OFFSET).astype(rgb.dtype)


def ycbcr_to_rgb(ycbcr):
    return _mix(_YCBCR_TO_RGB, ycbcr.astype(np.float64) - _OFFSET).astype(ycbcr.dtype)


def to_luma(x):
    """Y channel of an RGB tensor; single-channel tensors pass through"""
    if x.shape[1] == 1:
        return x
    if x.shape[1] != 3:
        raise ValueError(f'expected 1 or 3 channels, got {x.shape[1]}')
    return _mix(np.array([LUMA_WEIGHTS]), x).astype(x.dtype)
