"""Binary checkpoint codec.

Layout, all integers little-endian::

    b"SRCK"  u32 version (=1)  u32 tensor count
    per tensor:
        u16 name length, UTF-8 name ("stage.index.kind", e.g. "map.1.weight")
        u8 dtype (0 = float32)  u8 rank  rank x u64 dims
        payload, float32 little-endian, row-major

The model configuration is stored next to the file as ``<path>.json``.
Writing the same tensors always produces the same bytes.
"""
import json
import math
import struct
from pathlib import Path

import numpy as np

from core.exceptions import CheckpointError, InvalidConfig
from network.model import ModelConfig, model_init
from network.tensor import Rng

MAGIC = b'SRCK'
VERSION = 1
DTYPES = {0: np.dtype('<f4')}


def encode_tensors(tensors):
    """Serialize an ordered name -> array mapping"""
    chunks = [MAGIC, struct.pack('<II', VERSION, len(tensors))]
    for name, value in tensors.items():
        raw_name = name.encode('utf-8')
        value = np.ascontiguousarray(value, dtype=DTYPES[0])
        chunks.append(struct.pack('<H', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<BB', 0, value.ndim))
        chunks.append(struct.pack(f'<{value.ndim}Q', *value.shape))
        chunks.append(value.tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def remaining(self):
        return len(self.data) - self.offset

    def take(self, size):
        if self.offset + size > len(self.data):
            raise CheckpointError('checkpoint is truncated')
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_tensors(data):
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CheckpointError('not a checkpoint: bad magic bytes')
    version, count = reader.unpack('<II')
    if version != VERSION:
        raise CheckpointError(f'unsupported checkpoint version {version}')
    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        try:
            name = reader.take(name_len).decode('utf-8')
        except UnicodeDecodeError as exc:
            raise CheckpointError('tensor name is not UTF-8') from exc
        if name in tensors:
            raise CheckpointError(f'duplicate tensor {name!r}')
        dtype_code, rank = reader.unpack('<BB')
        if dtype_code not in DTYPES:
            raise CheckpointError(f'{name}: unknown dtype code {dtype_code}')
        shape = reader.unpack(f'<{rank}Q')
        dtype = DTYPES[dtype_code]
        size = math.prod(shape) * dtype.itemsize
        if size > reader.remaining():
            raise CheckpointError(f'{name}: shape {shape} needs {size} bytes, {reader.remaining()} left')
        try:
            tensors[name] = np.frombuffer(reader.take(size), dtype=dtype).reshape(shape).astype(np.float32)
        except ValueError as exc:
            raise CheckpointError(f'{name}: {exc}') from exc
    if reader.offset != len(data):
        raise CheckpointError('trailing bytes after the last tensor')
    return tensors


def write_tensors(path, tensors, meta):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors(tensors))
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + '\n', encoding='utf-8')


def read_tensors(path):
    path = Path(path)
    try:
        data = path.read_bytes()
        meta = json.loads(sidecar_path(path).read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f'cannot read checkpoint {path}: {exc}') from exc
    return decode_tensors(data), meta


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + '.json')


def save_checkpoint(path, model, **meta):
    """Write model tensors and a sidecar holding the model config plus meta"""
    write_tensors(path, model.state_dict(), {'model': model.config.to_dict(), **meta})


def load_checkpoint(path):
    """Rebuild the model stored at path; returns (model, sidecar dict)"""
    tensors, meta = read_tensors(path)
    try:
        config = ModelConfig.from_dict(meta['model'])
    except (KeyError, TypeError, InvalidConfig) as exc:
        raise CheckpointError(f'{path}: sidecar has no usable model config') from exc
    model = model_init(config, Rng(0), dtype=np.float32)
    try:
        model.load_state_dict(tensors)
    except ValueError as exc:
        raise CheckpointError(f'{path}: {exc}') from exc
    return model, meta
