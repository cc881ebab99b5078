"""Benchmarking upscalers (interpolation baselines and trained models) on a
directory of HR images.

Every image is cropped to a multiple of the scale, degraded, upscaled by
each method and scored on luma after cropping ``scale`` border pixels.
Images are processed in parallel; results keep filename order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from django.conf import settings

from core.exceptions import EmptyDataset, InvalidConfig, UnknownMethod
from imaging.baselines import MODES, crop_to_multiple, degrade, upscale
from imaging.color import rgb_to_ycbcr, ycbcr_to_rgb
from imaging.data import list_images, load_image
from imaging.metrics import MetricReport, evaluate_pair
from network.checkpoint import load_checkpoint
from network.model import super_resolve

logger = logging.getLogger(__name__)

MODEL_PREFIX = 'model:'


def parse_methods(text):
    """Split a comma list and reject unknown names"""
    methods = [m.strip() for m in text.split(',') if m.strip()] if isinstance(text, str) else list(text)
    if not methods:
        raise UnknownMethod('at least one method is required')
    for method in methods:
        if method in MODES:
            continue
        if method.startswith(MODEL_PREFIX) and method[len(MODEL_PREFIX):]:
            continue
        raise UnknownMethod(f'unknown method {method!r}; use {", ".join(MODES)} or model:<checkpoint>')
    return methods


def make_upscaler(method, scale):
    """Callable mapping an LR luma tensor to its SR estimate"""
    if method in MODES:
        return lambda lr: upscale(lr, scale, method)
    model, _ = load_checkpoint(method[len(MODEL_PREFIX):])
    if model.config.scale != scale:
        raise InvalidConfig(f'{method} upscales by {model.config.scale}, benchmark scale is {scale}')
    if model.config.channels != 1:
        raise InvalidConfig(f'{method} is an RGB model; benchmarks score luma models')
    return lambda lr: super_resolve(model, lr)


def super_resolve_image(model, x):
    """Upscale a (1, c, h, w) image; luma models get bicubic chroma"""
    if model.config.channels == 3:
        rgb = x if x.shape[1] == 3 else np.repeat(x, 3, axis=1)
        return super_resolve(model, rgb)
    if x.shape[1] == 1:
        return super_resolve(model, x)
    ycc = rgb_to_ycbcr(x)
    y = super_resolve(model, ycc[:, :1])
    chroma = upscale(ycc[:, 1:], model.config.scale, 'bicubic')
    return ycbcr_to_rgb(np.concatenate([y, chroma], axis=1))


def degrade_pair(path, scale):
    """(hr, lr) luma tensors for one benchmark image"""
    hr = crop_to_multiple(load_image(path), scale)
    lr = np.clip(degrade(hr, scale), 0.0, 1.0)
    return hr, lr


def _thread_count(threads):
    return max(1, min(threads or settings.SRRES_THREADS, settings.SRRES_THREADS))


def run_bench(data_root, methods, scale, border=None, threads=None):
    """One MetricReport per method, images in filename order"""
    if scale < 1:
        raise InvalidConfig(f'scale must be at least 1, got {scale}')
    methods = parse_methods(methods)
    files = list_images(data_root)
    if not files:
        raise EmptyDataset(f'no PNG images under {data_root}')
    border = scale if border is None else border
    upscalers = [(method, make_upscaler(method, scale)) for method in methods]

    def score(path):
        hr, lr = degrade_pair(path, scale)
        return [evaluate_pair(up(lr), hr, border, image=path.name) for _, up in upscalers]

    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        per_image = list(pool.map(score, files))

    reports = []
    for index, (method, _) in enumerate(upscalers):
        report = MetricReport(method)
        report.images = [scores[index] for scores in per_image]
        reports.append(report)
    ranking = sorted(reports, key=lambda r: r.mean_psnr, reverse=True)
    logger.info('mean PSNR ordering: %s', ' > '.join(f'{r.method} ({r.mean_psnr:.3f} dB)' for r in ranking))
    return reports


def run_eval(checkpoint, data_root, threads=None):
    """Score one checkpoint at its own scale"""
    model, _ = load_checkpoint(checkpoint)
    method = f'{MODEL_PREFIX}{Path(checkpoint)}'
    return run_bench(data_root, [method], model.config.scale, threads=threads)[0]
