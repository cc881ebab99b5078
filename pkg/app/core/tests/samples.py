"""Synthetic image fixtures shared by the test modules."""
import math
from pathlib import Path

import numpy as np
from PIL import Image

from network.tensor import Rng


def textured_plane(seed, h, w):
    """Sinusoid gratings plus a few hard-edged blocks, values in [0, 1]"""
    rng = Rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    plane = np.full((h, w), 0.5)
    for _ in range(6):
        fy = rng.uniform() * 0.2
        fx = rng.uniform() * 0.2
        phase = rng.uniform() * 2 * math.pi
        plane += 0.07 * np.sin(2 * math.pi * (fy * yy + fx * xx) + phase)
    for _ in range(3):
        top = rng.integers(0, h // 2)
        left = rng.integers(0, w // 2)
        plane[top:top + h // 4, left:left + w // 4] += rng.uniform() * 0.3 - 0.15
    return np.clip(plane, 0.0, 1.0)


def smooth_plane(seed, h, w):
    """Low-frequency gratings only"""
    rng = Rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    plane = np.full((h, w), 0.5)
    for _ in range(3):
        fy = rng.uniform() * 0.04
        fx = rng.uniform() * 0.04
        phase = rng.uniform() * 2 * math.pi
        plane += 0.1 * np.sin(2 * math.pi * (fy * yy + fx * xx) + phase)
    return plane


def as_tensor(plane, dtype=np.float32):
    return plane[None, None].astype(dtype)


def write_png(path, pixels):
    """Write a uint8 (h, w) or (h, w, 3) array"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path, format='PNG')
    return Path(path)


def write_textured_png(path, seed, h=32, w=32, color=False):
    plane = textured_plane(seed, h, w)
    pixels = np.floor(plane * 255 + 0.5).astype(np.uint8)
    if color:
        pixels = np.stack([pixels, pixels[::-1], pixels[:, ::-1]], axis=2)
    return write_png(path, pixels)


def sample_dataset(root, count=4, size=32, seed=0):
    """Directory of textured grayscale PNGs named img00.png, img01.png, ..."""
    root = Path(root)
    for i in range(count):
        write_textured_png(root / f'img{i:02d}.png', seed + i, size, size)
    return root
