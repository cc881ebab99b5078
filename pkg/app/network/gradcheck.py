"""Central finite-difference checks of analytic gradients.

Run inside ``float64_mode()``. For each sampled coordinate the numerical
derivative is (L(x + h) - L(x - h)) / 2h with h = 1e-4 and the relative
error is |a - n| / max(|a|, |n|, 1e-8). A coordinate whose perturbation
flips any ReLU on or off is not differentiable there and is skipped.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from network import layers
from network.model import model_backward, model_forward
from network.optim import mse_loss

logger = logging.getLogger(__name__)

STEP = 1e-4


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_err: float = 0.0
    checked: int = 0
    skipped: int = 0
    failures: List[tuple] = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures and self.checked > 0


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _coordinates(shape, max_coords, rng):
    size = int(np.prod(shape))
    if max_coords is None or size <= max_coords:
        return range(size)
    picked = set()
    while len(picked) < max_coords:
        picked.add(rng.integers(0, size))
    return sorted(picked)


def grad_check(evaluate, tensors, analytic, tolerance=1e-5, step=STEP, max_coords=None, rng=None, zero_tol=0.0):
    """Compare analytic gradients against central differences

    evaluate() returns (scalar loss, kink signature) for the current contents
    of ``tensors``, which are perturbed in place and restored. Coordinates
    where both gradients are at most ``zero_tol`` in magnitude are skipped.
    """
    report = GradCheckReport(tolerance)
    _, reference = evaluate()
    for name, value in tensors.items():
        flat = value.reshape(-1)
        grad = analytic[name].reshape(-1)
        for index in _coordinates(value.shape, max_coords, rng):
            original = flat[index]
            flat[index] = original + step
            plus, sig_plus = evaluate()
            flat[index] = original - step
            minus, sig_minus = evaluate()
            flat[index] = original
            if sig_plus != reference or sig_minus != reference:
                report.skipped += 1
                continue
            numeric = (plus - minus) / (2 * step)
            if zero_tol and max(abs(float(grad[index])), abs(numeric)) <= zero_tol:
                report.skipped += 1
                continue
            error = relative_error(float(grad[index]), numeric)
            report.checked += 1
            report.max_rel_err = max(report.max_rel_err, error)
            if error > tolerance:
                report.failures.append((name, index, float(grad[index]), numeric))
    if report.failures:
        logger.warning('gradient check failed at %d of %d coordinates', len(report.failures), report.checked)
    return report


def _probe_loss(y, probe):
    return float(np.sum(y * probe))


def check_conv(x, params, probe, **kwargs):
    """Check d_input, d_weight and d_bias of conv2d against L = sum(y * probe)"""
    _, cache = layers.conv2d_forward(x, params)
    g = layers.conv2d_backward(probe, cache)

    def evaluate():
        y, _ = layers.conv2d_forward(x, params)
        return _probe_loss(y, probe), b''

    tensors = {'input': x, 'weight': params.weight, 'bias': params.bias}
    analytic = {'input': g.d_input, 'weight': g.d_weight, 'bias': g.d_bias}
    return grad_check(evaluate, tensors, analytic, **kwargs)


def check_batchnorm(x, params, probe, **kwargs):
    _, cache = layers.batchnorm_forward(x, params, 'train')
    g = layers.batchnorm_backward(probe, cache)

    def evaluate():
        y, _ = layers.batchnorm_forward(x, params, 'train')
        return _probe_loss(y, probe), b''

    tensors = {'input': x, 'gamma': params.gamma, 'beta': params.beta}
    analytic = {'input': g.d_input, 'gamma': g.d_weight, 'beta': g.d_bias}
    return grad_check(evaluate, tensors, analytic, **kwargs)


def check_relu(x, probe, **kwargs):
    _, mask = layers.relu_forward(x)
    d_input = layers.relu_backward(probe, mask)

    def evaluate():
        y, m = layers.relu_forward(x)
        return _probe_loss(y, probe), m.tobytes()

    return grad_check(evaluate, {'input': x}, {'input': d_input}, **kwargs)


def check_pixel_shuffle(x, r, probe, **kwargs):
    d_input = layers.pixel_unshuffle(probe, r)

    def evaluate():
        return _probe_loss(layers.pixel_shuffle(x, r), probe), b''

    return grad_check(evaluate, {'input': x}, {'input': d_input}, **kwargs)


def check_mse(pred, target, **kwargs):
    _, d_pred = mse_loss(pred, target)

    def evaluate():
        return mse_loss(pred, target)[0].value, b''

    return grad_check(evaluate, {'pred': pred}, {'pred': d_pred}, **kwargs)


def check_model(model, lr_batch, hr_batch, **kwargs):
    """Check every parameter gradient of a model under the MSE loss"""
    sr, cache = model_forward(model, lr_batch, 'train')
    _, d_sr = mse_loss(sr, hr_batch)
    analytic = model_backward(model, cache, d_sr)

    def evaluate():
        out, c = model_forward(model, lr_batch, 'train')
        return mse_loss(out, hr_batch)[0].value, c.activation_pattern()

    return grad_check(evaluate, model.parameters(), analytic, **kwargs)
