"""Unit tests for Adam and the plateau schedule"""
import numpy as np
import pytest

from src.features.tensor_core import parameter
from src.features.training import AdamState, PlateauSchedule, adam_step
from src.shared.exceptions import ShapeMismatchError


class TestAdamStep:
    """Test the bias-corrected Adam update"""

    def test_first_step_moves_by_lr_sign(self, rng):
        """Test the first update is -lr * sign(g) for gradients far above eps"""
        p = parameter(rng.normal(size=(3, 4)), dtype=np.float64)
        start = p.data.copy()
        grad = rng.normal(size=(3, 4)) + np.sign(rng.normal(size=(3, 4)))
        lr = 1e-2
        adam_step([p], [grad], AdamState(), lr)
        np.testing.assert_allclose(p.data - start, -lr * np.sign(grad), atol=1e-6 * lr)

    def test_zero_gradient_no_update(self):
        """Test a zero gradient leaves the parameter unchanged"""
        p = parameter(np.ones(5), dtype=np.float64)
        adam_step([p], [np.zeros(5)], AdamState(), 0.1)
        np.testing.assert_array_equal(p.data, np.ones(5))

    def test_identical_runs_identical_state(self, rng):
        """Test two runs over the same gradients end bitwise identical"""
        grads = [rng.normal(size=4) for _ in range(10)]

        def run():
            p = parameter(np.zeros(4), dtype=np.float32)
            state = AdamState()
            for g in grads:
                adam_step([p], [g], state, 1e-3)
            return p.data, state

        (a, state_a), (b, state_b) = run(), run()
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(state_a.v[0], state_b.v[0])
        assert state_a.step == state_b.step == 10

    def test_keeps_parameter_dtype(self):
        """Test float32 parameters stay float32"""
        p = parameter(np.ones(3), dtype=np.float32)
        adam_step([p], [np.ones(3)], AdamState(), 1e-3)
        assert p.dtype == np.float32

    def test_shape_mismatch(self):
        """Test gradient shape mismatch raises"""
        p = parameter(np.ones((2, 2)))
        with pytest.raises(ShapeMismatchError):
            adam_step([p], [np.ones(3)], AdamState(), 1e-3)

    def test_count_mismatch(self):
        """Test a missing gradient raises"""
        with pytest.raises(ShapeMismatchError):
            adam_step([parameter(np.ones(2)), parameter(np.ones(2))], [np.ones(2)], AdamState(), 1e-3)


class TestPlateauSchedule:
    """Test learning-rate drops and early stopping"""

    def test_improvement_resets(self):
        """Test steadily improving values never drop the rate"""
        schedule = PlateauSchedule(1e-3, drops=2, patience=2)
        for value in (10.0, 9.0, 8.0, 7.0, 6.0):
            assert schedule.update(value)
        assert schedule.lr == 1e-3
        assert not schedule.should_stop

    def test_drop_after_patience(self):
        """Test the rate is divided by sqrt(10) after `patience` flat epochs"""
        schedule = PlateauSchedule(1e-3, drops=2, patience=3)
        schedule.update(1.0)
        for _ in range(3):
            assert not schedule.update(1.0)
        assert schedule.lr == pytest.approx(1e-3 / np.sqrt(10.0))

    def test_tiny_improvement_is_flat(self):
        """Test improvements under 0.1% count as a plateau"""
        schedule = PlateauSchedule(1e-3, drops=1, patience=1)
        schedule.update(1.0)
        assert not schedule.update(0.9995)
        assert schedule.lr < 1e-3

    def test_stop_after_final_drop(self):
        """Test a plateau after the last drop requests a stop"""
        schedule = PlateauSchedule(1e-3, drops=1, patience=1)
        schedule.update(1.0)
        schedule.update(1.0)
        assert not schedule.should_stop
        schedule.update(1.0)
        assert schedule.should_stop
        assert schedule.lr == pytest.approx(1e-3 / np.sqrt(10.0))
