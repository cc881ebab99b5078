import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import CheckpointError
from network.checkpoint import (
    MAGIC, decode_tensors, encode_tensors, load_checkpoint, save_checkpoint, sidecar_path,
)
from network.model import ModelConfig, model_init, super_resolve
from network.tensor import Rng


def sample_model(**params):
    return model_init(ModelConfig(feat_channels=4, mapping_layers=2, **params), Rng(3))


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_read_write_is_byte_identical(self):
        """Test canonical serialization"""
        first = self.root / 'a.srck'
        second = self.root / 'b.srck'
        save_checkpoint(first, sample_model(use_batchnorm=True), epoch=3, step=30)
        model, meta = load_checkpoint(first)
        save_checkpoint(second, model, epoch=meta['epoch'], step=meta['step'])
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(sidecar_path(first).read_bytes(), sidecar_path(second).read_bytes())

    def test_restores_model(self):
        """Test the loaded model has the saved config and predictions"""
        path = self.root / 'm.srck'
        original = sample_model(residual=False, final_activation='clamp01')
        save_checkpoint(path, original)
        model, meta = load_checkpoint(path)
        self.assertEqual(model.config, original.config)
        self.assertEqual(meta['model']['final_activation'], 'clamp01')
        x = Rng(0).uniform_array((1, 1, 5, 5))
        np.testing.assert_array_equal(super_resolve(model, x), super_resolve(original, x))

    def test_layout_header(self):
        """Test magic, version and the first tensor record"""
        data = encode_tensors({'feat.0.bias': np.array([1.0, 2.0], dtype=np.float32)})
        self.assertEqual(data[:4], MAGIC)
        self.assertEqual(struct.unpack('<II', data[4:12]), (1, 1))
        self.assertEqual(struct.unpack('<H', data[12:14]), (11,))
        self.assertEqual(data[14:25], b'feat.0.bias')
        self.assertEqual(len(data), 25 + 2 + 8 + 8)

    def test_corrupted_magic(self):
        """Test bad magic bytes are rejected"""
        data = bytearray(encode_tensors(sample_model().state_dict()))
        data[:4] = b'XXXX'
        with self.assertRaises(CheckpointError):
            decode_tensors(bytes(data))

    def test_bad_version(self):
        """Test an unknown version is rejected"""
        data = bytearray(encode_tensors(sample_model().state_dict()))
        data[4:8] = struct.pack('<I', 2)
        with self.assertRaises(CheckpointError):
            decode_tensors(bytes(data))

    def test_truncated_and_trailing(self):
        """Test missing and surplus bytes are rejected"""
        data = encode_tensors(sample_model().state_dict())
        with self.assertRaises(CheckpointError):
            decode_tensors(data[:-3])
        with self.assertRaises(CheckpointError):
            decode_tensors(data + b'\0')

    def test_missing_sidecar(self):
        """Test a checkpoint without its config sidecar"""
        path = self.root / 'm.srck'
        save_checkpoint(path, sample_model())
        sidecar_path(path).unlink()
        with self.assertRaises(CheckpointError):
            load_checkpoint(path)

    def test_config_tensor_disagreement(self):
        """Test a sidecar describing another network"""
        path = self.root / 'm.srck'
        save_checkpoint(path, sample_model())
        sidecar_path(path).write_text('{"model": {"feat_channels": 8}}')
        with self.assertRaises(CheckpointError):
            load_checkpoint(path)

    def test_overflowing_dims(self):
        """Test dims whose product overflows 64 bits are rejected"""
        path = self.root / 'm.srck'
        save_checkpoint(path, sample_model())
        data = bytearray(path.read_bytes())
        dims = data.index(b'feat.0.weight') + len('feat.0.weight') + 2
        data[dims:dims + 16] = struct.pack('<QQ', 2 ** 32, 2 ** 32)
        path.write_bytes(bytes(data))
        with self.assertRaises(CheckpointError):
            load_checkpoint(path)

    def test_duplicate_names(self):
        """Test a tensor name may appear only once"""
        record = encode_tensors({'a': np.ones(2, dtype=np.float32)})[12:]
        data = MAGIC + struct.pack('<II', 1, 2) + record + record
        with self.assertRaises(CheckpointError):
            decode_tensors(data)
