"""Mean squared error, SGD and Adam updates, gradient clipping.

N in the loss is the total element count of the batch, so gradients keep
the same magnitude across patch sizes. The learning rate is constant.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import InvalidConfig, ShapeMismatch

logger = logging.getLogger(__name__)

OPTIMIZERS = ('sgd', 'adam')


@dataclass(frozen=True)
class LossValue:
    value: float
    n: int

    def __float__(self):
        return self.value


@dataclass
class OptimState:
    kind: str = 'adam'
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise InvalidConfig(f'optimizer must be one of {OPTIMIZERS}, got {self.kind!r}')
        if self.lr < 0:
            raise InvalidConfig('learning rate must be non-negative')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfig('Adam betas must lie in [0, 1)')


def mse_loss(pred, target):
    """(mean of squared differences, gradient 2 * (pred - target) / N)"""
    if pred.shape != target.shape:
        raise ShapeMismatch(f'prediction {pred.shape} vs target {target.shape}')
    diff = pred - target
    n = diff.size
    value = float(np.sum(np.square(diff, dtype=np.float64)) / n)
    return LossValue(value, n), diff * diff.dtype.type(2.0 / n)


def _check_grads(params, grads):
    for name, value in params.items():
        if name not in grads:
            raise ShapeMismatch(f'no gradient for {name}')
        if grads[name].shape != value.shape:
            raise ShapeMismatch(f'{name}: gradient {grads[name].shape} vs parameter {value.shape}')


def sgd_step(params, grads, state):
    """theta <- theta - lr * g, in place; returns params"""
    _check_grads(params, grads)
    state.t += 1
    for name, value in params.items():
        value -= value.dtype.type(state.lr) * grads[name]
    return params


def adam_step(params, grads, state):
    """Bias-corrected Adam update, in place; returns params"""
    _check_grads(params, grads)
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, value in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        value -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps_adam)).astype(value.dtype)
    return params


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def clip_grad_norm(grads, max_norm):
    """Rescale all gradients together so their global L2 norm is at most max_norm"""
    norm = global_norm(grads)
    if max_norm and norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= g.dtype.type(factor)
        logger.debug('clipped gradient norm %.4g to %.4g', norm, max_norm)
    return norm


class Optimizer:
    """Owns the optimizer state of one training run"""

    def __init__(self, state):
        self.state = state
        self._step = sgd_step if state.kind == 'sgd' else adam_step

    def step(self, model, grads):
        self._step(model.parameters(), grads, self.state)
        model.mark_updated()

    def moments(self):
        """Moment buffers by checkpoint name, for resuming"""
        tensors = {}
        for name in sorted(self.state.m):
            tensors[f'm.{name}'] = self.state.m[name]
            tensors[f'v.{name}'] = self.state.v[name]
        return tensors

    def load_moments(self, tensors, t):
        self.state.t = t
        for key, value in tensors.items():
            kind, name = key.split('.', 1)
            getattr(self.state, kind)[name] = value.copy()
