"""Image ingestion, dataset manifests and LR/HR patch sampling.

PNG files are the only input format. Pixels are normalized to [0, 1]
floats at decode time and quantized back to 8 bits only when an image is
written, so each image crosses the 8-bit boundary once on the way in and
once on the way out.

LR images are produced by degrading whole HR images once; patches are cut
from both afterwards. Degraded images are cached as float32 ``.npy`` files
under ``<root>/.lr_x<r>/``.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List

import numpy as np
from django.conf import settings
from PIL import Image

from core.exceptions import DecodeError, EmptyDataset, InvalidShape
from imaging.baselines import crop_to_multiple, degrade
from imaging.color import to_luma
from network.tensor import Rng

logger = logging.getLogger(__name__)


def _decode(path):
    """Return an (h, w) or (h, w, 3) uint8 array"""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format != 'PNG':
                raise DecodeError(f'{path.name}: expected PNG, got {img.format}')
            img.load()
            if img.mode in ('1', 'LA'):
                img = img.convert('L')
            elif img.mode in ('P', 'RGBA'):
                img = img.convert('RGB')
            if img.mode not in ('L', 'RGB'):
                raise DecodeError(f'{path.name}: unsupported pixel mode {img.mode}')
            return np.asarray(img, dtype=np.uint8).copy()
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f'{path.name}: {exc}') from exc


def _to_tensor(pixels):
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    return (pixels.astype(np.float64) / 255.0).transpose(2, 0, 1)[None]


def load_pixels(path):
    """(1, c, h, w) float32 tensor in [0, 1]; c is 1 for grayscale files and 3 otherwise"""
    return _to_tensor(_decode(path)).astype(np.float32)


def load_image(path, channels=1):
    """(1, channels, h, w) float32 tensor in [0, 1]; one channel means BT.601 luma"""
    pixels = _decode(path)
    x = _to_tensor(pixels)
    if channels == 1:
        x = to_luma(x)
    elif x.shape[1] == 1:
        x = np.repeat(x, 3, axis=1)
    return np.clip(x, 0.0, 1.0).astype(np.float32)


def quantize(x):
    """Clamp to [0, 1] and round half away from zero onto 0..255"""
    return np.floor(np.clip(x.astype(np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(x, path):
    """Write a (1, c, h, w) tensor as an 8-bit PNG"""
    pixels = quantize(x[0]).transpose(1, 2, 0)
    if pixels.shape[2] == 1:
        pixels = pixels[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format='PNG')


def image_size(path):
    """(width, height) of a decodable PNG"""
    pixels = _decode(path)
    return pixels.shape[1], pixels.shape[0]


def list_images(root):
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f'{root} is not a directory')
    return sorted(p for p in root.glob('*.png') if p.is_file())


@dataclass
class ManifestImage:
    name: str
    w: int
    h: int
    split: str


@dataclass
class DatasetManifest:
    root: str
    scale: int
    seed: int
    patch: int = 32
    split_ratio: float = 0.9
    images: List[ManifestImage] = field(default_factory=list)

    def names(self, split=None):
        return [img.name for img in self.images if split is None or img.split == split]

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + '\n'

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding='utf-8')

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text(encoding='utf-8'))
        data['images'] = [ManifestImage(**img) for img in data['images']]
        return cls(**data)


def build_manifest(root, scale, split_ratio=0.9, seed=0, patch=32):
    """Deterministically split every PNG under root into train and val"""
    files = list_images(root)
    if len(files) < 2:
        raise EmptyDataset(f'{root} needs at least 2 PNG images, found {len(files)}')
    sizes = {p.name: image_size(p) for p in files}
    order = Rng(seed).shuffle([p.name for p in files])
    n_train = int(math.floor(split_ratio * len(order) + 1e-9))
    if n_train < 1:
        raise EmptyDataset(f'split ratio {split_ratio} leaves the train split empty')
    if n_train >= len(order):
        raise EmptyDataset(f'split ratio {split_ratio} leaves the validation split empty')
    train = set(order[:n_train])
    images = [
        ManifestImage(name, sizes[name][0], sizes[name][1], 'train' if name in train else 'val')
        for name in sorted(sizes)
    ]
    manifest = DatasetManifest(str(root), scale, seed, patch, split_ratio, images)
    logger.info('manifest for %s: %d train / %d val images', root, n_train, len(order) - n_train)
    return manifest


@dataclass
class SamplePair:
    lr_patch: np.ndarray
    hr_patch: np.ndarray
    image: str
    top_left: tuple
    scale: int

    def __post_init__(self):
        lh, lw = self.lr_patch.shape[2:]
        if self.hr_patch.shape[2:] != (lh * self.scale, lw * self.scale):
            raise InvalidShape(f'HR patch {self.hr_patch.shape} is not {self.scale}x LR {self.lr_patch.shape}')


class ImageStore:
    """HR images of a manifest with their degraded LR counterparts"""

    def __init__(self, manifest, channels=1, workers=1, use_cache=True):
        self.manifest = manifest
        self.scale = manifest.scale
        self.channels = channels
        self.use_cache = use_cache
        self.clamped = 0
        self._images = {}
        names = manifest.names()
        workers = max(1, min(workers, settings.SRRES_THREADS))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                loaded = list(pool.map(self._load, names))
        else:
            loaded = [self._load(name) for name in names]
        for name, pair, clamped in loaded:
            self._images[name] = pair
            self.clamped += clamped
        logger.info('loaded %d images, %d LR pixels clamped to [0, 1]', len(names), self.clamped)

    def _cache_path(self, name):
        suffix = '.npy' if self.channels == 1 else '.rgb.npy'
        return Path(self.manifest.root) / f'.lr_x{self.scale}' / (Path(name).stem + suffix)

    def _load(self, name):
        source = Path(self.manifest.root) / name
        hr = crop_to_multiple(load_image(source, self.channels), self.scale)
        cache = self._cache_path(name)
        if self.use_cache and cache.exists() and cache.stat().st_mtime >= source.stat().st_mtime:
            lr = np.load(cache)
        else:
            lr = degrade(hr, self.scale).astype(np.float64)
            if self.use_cache:
                try:
                    cache.parent.mkdir(exist_ok=True)
                    # unclamped, so a cache hit counts the same clamped pixels
                    np.save(cache, lr)
                except OSError as exc:
                    logger.warning('cannot cache LR image %s: %s', cache, exc)
        clamped = int(np.count_nonzero((lr < 0) | (lr > 1)))
        lr = np.clip(lr, 0.0, 1.0).astype(np.float32)
        logger.debug('%s: degraded to %s, %d pixels clamped', name, lr.shape[2:], clamped)
        return name, (hr, lr), clamped

    def names(self, split=None):
        return self.manifest.names(split)

    def get(self, name):
        """(hr, lr) tensors; hr is cropped to a multiple of the scale"""
        return self._images[name]

    def grid_patch_count(self, split, patch):
        """Number of non-overlapping LR patches over a split"""
        total = 0
        for name in self.names(split):
            lr = self.get(name)[1]
            total += (lr.shape[2] // patch) * (lr.shape[3] // patch)
        return total


def sample_patches(source, count, patch, rng, split='train', flip=False):
    """Draw count aligned LR/HR patch pairs at uniform random positions"""
    store = source if isinstance(source, ImageStore) else ImageStore(source)
    r = store.scale
    names = store.names(split)
    if not names:
        raise EmptyDataset(f'split {split!r} is empty')
    smallest = min(min(store.get(name)[0].shape[2:]) for name in names)
    if patch < 1 or patch * r > smallest:
        raise InvalidShape(f'patch {patch} at scale {r} does not fit the smallest image side {smallest}')
    pairs = []
    for _ in range(count):
        name = names[rng.integers(0, len(names))]
        hr, lr = store.get(name)
        top = rng.integers(0, lr.shape[2] - patch + 1)
        left = rng.integers(0, lr.shape[3] - patch + 1)
        lr_patch = lr[:, :, top:top + patch, left:left + patch]
        hr_patch = hr[:, :, top * r:(top + patch) * r, left * r:(left + patch) * r]
        if flip and rng.uniform() < 0.5:
            lr_patch = lr_patch[..., ::-1]
            hr_patch = hr_patch[..., ::-1]
        pairs.append(SamplePair(lr_patch.copy(), hr_patch.copy(), name, (top, left), r))
    return pairs


def stack_pairs(pairs):
    """Concatenate sample pairs into (lr_batch, hr_batch)"""
    lr = np.concatenate([p.lr_patch for p in pairs], axis=0)
    hr = np.concatenate([p.hr_patch for p in pairs], axis=0)
    return lr, hr
