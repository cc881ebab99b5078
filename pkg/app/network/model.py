"""Three-stage super-resolution network.

feature extraction -> nonlinear mapping -> reconstruction, all at LR size,
followed by one pixel shuffle to the HR grid. With ``residual`` set the
bicubic upscale of the input is added to the network output, so the
convolutions only learn the missing detail.
"""
import math
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from core.exceptions import InvalidConfig, InvalidState, ShapeMismatch
from imaging.baselines import ResampleSpec, resample
from network import layers
from network.tensor import default_dtype

LAYER_ORDERS = {
    'conv_bn_relu': ('conv', 'bn', 'relu'),
    'conv_relu_bn': ('conv', 'relu', 'bn'),
}
FINAL_ACTIVATIONS = ('identity', 'clamp01')


@dataclass(frozen=True)
class ModelConfig:
    scale: int = 2
    channels: int = 1
    feat_channels: int = 32
    mapping_layers: int = 3
    kernel_size: int = 3
    use_batchnorm: bool = False
    layer_order: str = 'conv_bn_relu'
    residual: bool = True
    final_activation: str = 'identity'
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def validate(self):
        """Raise InvalidConfig listing every broken rule"""
        problems = []
        if self.scale < 1:
            problems.append('scale must be at least 1')
        if self.channels < 1 or self.feat_channels < 1:
            problems.append('channel counts must be positive')
        if self.mapping_layers < 1:
            problems.append('mapping_layers must be at least 1')
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            problems.append(f'kernel_size must be odd, got {self.kernel_size}')
        if self.layer_order not in LAYER_ORDERS:
            problems.append(f'layer_order must be one of {sorted(LAYER_ORDERS)}')
        if self.final_activation not in FINAL_ACTIVATIONS:
            problems.append(f'final_activation must be one of {FINAL_ACTIVATIONS}')
        if not 0 < self.bn_momentum < 1:
            problems.append('bn_momentum must lie in (0, 1)')
        if self.bn_eps <= 0:
            problems.append('bn_eps must be positive')
        if problems:
            raise InvalidConfig('; '.join(problems))
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f'unknown model config keys: {sorted(unknown)}')
        return cls(**data).validate()


@dataclass
class ConvBlock:
    """One conv with optional batchnorm and ReLU applied in ``ops`` order"""
    name: str
    conv: layers.ConvParams
    bn: Optional[layers.BatchNormParams] = None
    ops: tuple = ('conv',)

    def tensors(self):
        items = [('weight', self.conv.weight), ('bias', self.conv.bias)]
        if self.bn is not None:
            items += [('bn_gamma', self.bn.gamma), ('bn_beta', self.bn.beta)]
        return [(f'{self.name}.{kind}', value) for kind, value in items]

    def buffers(self):
        if self.bn is None:
            return []
        return [
            (f'{self.name}.bn_mean', self.bn.running_mean),
            (f'{self.name}.bn_var', self.bn.running_var),
        ]


@dataclass
class ModelCache:
    model_id: int
    generation: int
    mode: str
    lr_shape: tuple
    out_shape: tuple
    blocks: List[list] = field(default_factory=list)

    def activation_pattern(self):
        """Concatenated ReLU masks; changes whenever an activation crosses zero"""
        masks = [cache.ravel() for block in self.blocks for op, cache in block if op == 'relu']
        if not masks:
            return b''
        return np.packbits(np.concatenate(masks)).tobytes()


class SrModel:
    """Ordered conv blocks for the three stages plus the shuffle and skip"""

    def __init__(self, config, feature, mapping, reconstruction):
        self.config = config
        self.feature = feature
        self.mapping = list(mapping)
        self.reconstruction = reconstruction
        self.generation = 0

    @property
    def blocks(self):
        return [self.feature, *self.mapping, self.reconstruction]

    @property
    def dtype(self):
        return self.feature.conv.weight.dtype

    def parameters(self):
        """Learnable tensors by name; the arrays are the model's own storage"""
        return {name: value for block in self.blocks for name, value in block.tensors()}

    def state_dict(self):
        """Parameters and batchnorm running moments, in checkpoint order"""
        state = {}
        for block in self.blocks:
            state.update(block.tensors())
            state.update(block.buffers())
        return state

    def load_state_dict(self, state):
        own = self.state_dict()
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise ShapeMismatch(f'state mismatch: missing {missing}, unexpected {extra}')
        for name, target in own.items():
            if target.shape != tuple(state[name].shape):
                raise ShapeMismatch(f'{name}: expected {target.shape}, got {state[name].shape}')
            target[...] = state[name]
        self.mark_updated()

    def mark_updated(self):
        """Invalidate caches taken before a parameter change"""
        self.generation += 1

    def astype(self, dtype):
        """Deep copy of the model with every tensor cast to dtype"""
        def cast_block(block):
            conv = layers.ConvParams(
                block.conv.weight.astype(dtype), block.conv.bias.astype(dtype),
                block.conv.stride, block.conv.pad,
            )
            bn = None
            if block.bn is not None:
                bn = layers.BatchNormParams(
                    block.bn.gamma.astype(dtype), block.bn.beta.astype(dtype),
                    block.bn.running_mean.astype(dtype), block.bn.running_var.astype(dtype),
                    eps=block.bn.eps, momentum=block.bn.momentum,
                )
            return ConvBlock(block.name, conv, bn, block.ops)

        return SrModel(
            self.config,
            cast_block(self.feature),
            [cast_block(b) for b in self.mapping],
            cast_block(self.reconstruction),
        )


def _make_block(name, in_c, out_c, config, rng, dtype, hidden=True):
    k = config.kernel_size
    std = math.sqrt(2.0 / (in_c * k * k))
    conv = layers.ConvParams.same(
        rng.normal_array((out_c, in_c, k, k), std=std, dtype=dtype),
        np.zeros(out_c, dtype=dtype),
    )
    if not hidden:
        return ConvBlock(name, conv)
    ops = LAYER_ORDERS[config.layer_order]
    bn = None
    if config.use_batchnorm:
        bn = layers.BatchNormParams.identity(
            out_c, dtype=dtype, eps=config.bn_eps, momentum=config.bn_momentum,
        )
    else:
        ops = tuple(op for op in ops if op != 'bn')
    return ConvBlock(name, conv, bn, ops)


def model_init(config, rng, dtype=None):
    """Build a model with He-normal kernels and zero biases, deterministic under rng"""
    config.validate()
    dtype = dtype or default_dtype()
    feat = config.feat_channels
    feature = _make_block('feat.0', config.channels, feat, config, rng, dtype)
    mapping = [
        _make_block(f'map.{i}', feat, feat, config, rng, dtype)
        for i in range(config.mapping_layers)
    ]
    reconstruction = _make_block(
        'recon.0', feat, config.channels * config.scale ** 2, config, rng, dtype, hidden=False,
    )
    return SrModel(config, feature, mapping, reconstruction)


def model_num_params(model):
    return sum(value.size for value in model.parameters().values())


def expected_num_params(config):
    """Closed form: sum of out*in*k*k + out per conv, plus 2*feat per batchnorm"""
    k2 = config.kernel_size ** 2
    feat = config.feat_channels
    total = feat * config.channels * k2 + feat
    total += config.mapping_layers * (feat * feat * k2 + feat)
    out = config.channels * config.scale ** 2
    total += out * feat * k2 + out
    if config.use_batchnorm:
        total += 2 * feat * (config.mapping_layers + 1)
    return total


def model_summary(model):
    """One line per tensor: name, shape, element count"""
    lines = [f'{name:<20} {str(tuple(value.shape)):<18} {value.size}' for name, value in model.state_dict().items()]
    lines.append(f'learnable parameters: {model_num_params(model)}')
    return lines


def bicubic_upscale(x, scale):
    return resample(x, ResampleSpec(mode='bicubic', scale=scale))


def _block_forward(block, x, mode):
    caches = []
    for op in block.ops:
        if op == 'conv':
            x, cache = layers.conv2d_forward(x, block.conv)
        elif op == 'bn':
            x, cache = layers.batchnorm_forward(x, block.bn, mode)
        else:
            x, cache = layers.relu_forward(x)
        caches.append((op, cache))
    return x, caches


def _block_backward(block, caches, d_y, grads):
    for op, cache in reversed(caches):
        if op == 'conv':
            g = layers.conv2d_backward(d_y, cache)
            grads[f'{block.name}.weight'] = g.d_weight
            grads[f'{block.name}.bias'] = g.d_bias
            d_y = g.d_input
        elif op == 'bn':
            g = layers.batchnorm_backward(d_y, cache)
            grads[f'{block.name}.bn_gamma'] = g.d_weight
            grads[f'{block.name}.bn_beta'] = g.d_bias
            d_y = g.d_input
        else:
            d_y = layers.relu_backward(d_y, cache)
    return d_y


def model_forward(m, lr_batch, mode='infer'):
    """Return the (n, c, h*r, w*r) prediction and the cache for model_backward"""
    config = m.config
    if lr_batch.ndim != 4 or lr_batch.shape[1] != config.channels:
        raise ShapeMismatch(f'model expects {config.channels} input channels, got shape {lr_batch.shape}')
    if mode not in ('train', 'infer'):
        raise ValueError(f'unknown mode {mode!r}')
    cache = ModelCache(id(m), m.generation, mode, lr_batch.shape, None)
    x = lr_batch
    for block in m.blocks:
        x, block_caches = _block_forward(block, x, mode)
        cache.blocks.append(block_caches)
    out = layers.pixel_shuffle(x, config.scale)
    if config.residual:
        out = out + bicubic_upscale(lr_batch, config.scale)
    if mode == 'infer' and config.final_activation == 'clamp01':
        out = np.clip(out, 0, 1)
    cache.out_shape = out.shape
    return out, cache


def model_backward(m, cache, d_out):
    """Gradient of every learnable tensor, keyed like ``parameters()``"""
    if cache.model_id != id(m) or cache.generation != m.generation:
        raise InvalidState('cache is stale: parameters changed since the forward pass')
    if cache.mode != 'train':
        raise InvalidState('model backward needs a train-mode cache')
    if d_out.shape != cache.out_shape:
        raise ShapeMismatch(f'upstream gradient {d_out.shape} vs output {cache.out_shape}')
    grads = {}
    d_y = layers.pixel_unshuffle(d_out, m.config.scale)
    for block, block_caches in zip(reversed(m.blocks), reversed(cache.blocks)):
        d_y = _block_backward(block, block_caches, d_y, grads)
    return {name: grads[name] for name in m.parameters()}


def super_resolve(m, lr_batch):
    """Inference-mode prediction"""
    out, _ = model_forward(m, lr_batch, mode='infer')
    return out
