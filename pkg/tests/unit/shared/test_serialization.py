"""Unit tests for the UIM1 tensor container"""
import struct

import numpy as np
import pytest

from src.shared.constants import CHECKPOINT_MAGIC
from src.shared.exceptions import CheckpointError
from src.shared.serialization import decode_tensors, encode_tensors, load_tensors, save_tensors


class TestTensorContainer:
    """Test encoding, decoding and integrity checks"""

    def test_values_stored_as_float32(self, rng):
        """Test float64 input comes back as the float32 rounding"""
        values = rng.normal(size=(3, 4))
        decoded = decode_tensors(encode_tensors({"w": values}))["w"]
        assert decoded.dtype == np.float32
        np.testing.assert_array_equal(decoded, values.astype(np.float32))

    def test_names_and_order_kept(self):
        """Test tensor names survive in insertion order"""
        tensors = {"f/conv.weight": np.ones((2, 1, 3, 3)), "meta/step": np.array(7.0), "empty": np.zeros((0, 4))}
        decoded = decode_tensors(encode_tensors(tensors))
        assert list(decoded) == list(tensors)
        assert decoded["meta/step"].shape == ()
        assert decoded["empty"].shape == (0, 4)

    def test_header_layout(self):
        """Test magic, version and count lead the file"""
        blob = encode_tensors({"a": np.zeros(1), "b": np.zeros(2)})
        assert blob[:4] == CHECKPOINT_MAGIC
        assert struct.unpack_from("<II", blob, 4) == (1, 2)

    def test_crc_mismatch(self):
        """Test a flipped byte in the body is detected"""
        blob = bytearray(encode_tensors({"a": np.arange(4.0)}))
        blob[20] ^= 0xFF
        with pytest.raises(CheckpointError, match="CRC"):
            decode_tensors(bytes(blob))

    def test_truncated(self):
        """Test a short file is refused"""
        with pytest.raises(CheckpointError):
            decode_tensors(CHECKPOINT_MAGIC + b"\x00")

    def test_file_round_trip(self, tmp_path):
        """Test save/load through a nested path"""
        path = tmp_path / "nested" / "t.uim"
        save_tensors(path, {"x": np.eye(3)})
        np.testing.assert_array_equal(load_tensors(path)["x"], np.eye(3, dtype=np.float32))

    def test_missing_file(self, tmp_path):
        """Test loading a missing file raises CheckpointError"""
        with pytest.raises(CheckpointError):
            load_tensors(tmp_path / "missing.uim")
