"""Unit tests for model checkpoints"""
import numpy as np
import pytest

from src.features.training import AdamState, TrainingState, adam_step, load_checkpoint, save_checkpoint
from src.features.training.checkpoint import checkpoint_tensors
from src.shared.exceptions import CheckpointError
from src.shared.serialization import decode_tensors, encode_tensors, save_tensors
from tests.utils import TestDataFactory


class TestCheckpointRoundTrip:
    """Test save/load of estimators and training state"""

    def test_weights_bitwise_identical(self, tmp_path):
        """Test reloaded weights and a re-saved file are bitwise identical"""
        f = TestDataFactory.cs_estimator(seed=4)
        path = save_checkpoint(tmp_path / "a.uim", f)
        loaded = load_checkpoint(path)
        for name, value in f.state_dict().items():
            np.testing.assert_array_equal(loaded.f.state_dict()[name], value)
        again = save_checkpoint(tmp_path / "b.uim", loaded.f)
        assert path.read_bytes() == again.read_bytes()

    def test_geometry_restored(self, tmp_path):
        """Test variant, size, widths and kernel size come back"""
        f, g = TestDataFactory.deblur_estimators(kernel_size=3)
        loaded = load_checkpoint(save_checkpoint(tmp_path / "m.uim", f, g))
        assert loaded.meta.variant == "deblur"
        assert loaded.meta.input_size == 16
        assert loaded.meta.widths == (4, 8, 8)
        assert loaded.g is not None and loaded.g.kernel_size == 3
        for name, value in g.state_dict().items():
            np.testing.assert_array_equal(loaded.g.state_dict()[name], value)

    def test_training_state_restored(self, tmp_path):
        """Test step, epoch, lr, plateau state and Adam moments survive a round trip"""
        f = TestDataFactory.cs_estimator()
        params = f.parameters()
        adam = AdamState()
        adam_step(params, [np.ones_like(p.data) for p in params], adam, 1e-3)
        state = TrainingState(step=12, epoch=3, lr=1e-3, adam=adam, drops_left=1, plateau_best=0.25, stale=2)
        phi = np.eye(4, 16)
        loaded = load_checkpoint(save_checkpoint(tmp_path / "s.uim", f, state=state, phi=phi))
        assert (loaded.state.step, loaded.state.epoch) == (12, 3)
        assert loaded.state.lr == pytest.approx(1e-3)
        assert (loaded.state.drops_left, loaded.state.stale) == (1, 2)
        assert loaded.state.plateau_best == pytest.approx(0.25)
        assert loaded.state.adam.step == 1
        for stored, original in zip(loaded.state.adam.m, adam.m):
            np.testing.assert_array_equal(stored, original)
        np.testing.assert_array_equal(loaded.phi, phi)

    def test_snapshot_params_override(self, tmp_path):
        """Test an explicit parameter snapshot is written instead of live weights"""
        f = TestDataFactory.cs_estimator()
        snapshot = {"f": {k: np.zeros_like(v) for k, v in f.state_dict().items()}}
        loaded = load_checkpoint(save_checkpoint(tmp_path / "best.uim", f, params=snapshot))
        assert all(np.all(v == 0) for v in loaded.f.state_dict().values())


class TestCheckpointErrors:
    """Test corrupted and incomplete checkpoints are refused"""

    def test_single_bit_flips_detected(self, rng):
        """Test every one of 1000 random single-bit flips is rejected"""
        blob = encode_tensors(checkpoint_tensors(TestDataFactory.cs_estimator()))
        for position in rng.integers(0, len(blob) * 8, size=1000):
            corrupted = bytearray(blob)
            corrupted[position // 8] ^= 1 << int(position % 8)
            with pytest.raises(CheckpointError):
                decode_tensors(bytes(corrupted))

    def test_missing_metadata(self, tmp_path):
        """Test a container without estimator metadata is refused"""
        save_tensors(tmp_path / "bare.uim", {"f/x": np.zeros(2)})
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "bare.uim")

    def test_missing_parameter(self, tmp_path):
        """Test a checkpoint lacking a weight is refused"""
        tensors = checkpoint_tensors(TestDataFactory.cs_estimator())
        tensors.pop(sorted(k for k in tensors if k.startswith("f/"))[0])
        save_tensors(tmp_path / "partial.uim", tensors)
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "partial.uim")

    def test_adam_count_mismatch(self, tmp_path):
        """Test Adam moments for a different model are refused"""
        f = TestDataFactory.cs_estimator()
        state = TrainingState(adam=AdamState(m=[np.zeros(1)], v=[np.zeros(1)], step=1))
        save_checkpoint(tmp_path / "adam.uim", f, state=state)
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "adam.uim")

    def test_missing_file(self, tmp_path):
        """Test a missing file raises CheckpointError"""
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nope.uim")
