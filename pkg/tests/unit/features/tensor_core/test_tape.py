"""Unit tests for the gradient tape"""
import numpy as np
import pytest

from src.features.tensor_core import (
    Tape,
    Tensor,
    backward,
    conv2d,
    concat,
    getitem,
    mul,
    relu,
    reshape,
    square,
    stop_gradient,
    tsum,
)
from src.features.tensor_core.gradcheck import check_gradients
from src.shared.exceptions import TapeError


class TestTape:
    """Test recording and reverse replay"""

    def test_sum_gradient_is_ones(self):
        """Test loss = sum(x) gives grad of ones"""
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with Tape():
            loss = tsum(x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_stop_gradient_blocks_exactly(self):
        """Test gradient through a stop-gradient edge is exactly zero"""
        x = Tensor([2.0, -1.0], requires_grad=True)
        w = Tensor([1.0, 1.0], requires_grad=True)
        with Tape() as tape:
            loss = tsum(mul(stop_gradient(square(x)), w))
        grad_x, grad_w = tape.gradient(loss, [x, w])
        assert np.array_equal(grad_x, np.zeros(2))
        np.testing.assert_array_equal(grad_w, [4.0, 1.0])
        assert len(tape.stop_markers) == 1

    def test_non_scalar_loss_rejected(self):
        """Test backward on a vector raises"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape():
            y = square(x)
        with pytest.raises(TapeError):
            backward(y)

    def test_loss_without_tape_rejected(self):
        """Test backward on an unrecorded tensor raises"""
        x = Tensor([1.0], requires_grad=True)
        with pytest.raises(TapeError):
            backward(tsum(x))

    def test_no_recording_outside_tape(self):
        """Test forward evaluation without a tape leaves no gradient state"""
        x = Tensor([1.0], requires_grad=True)
        y = square(x)
        assert not y.requires_grad
        assert x.grad is None

    def test_gradients_accumulate(self):
        """Test two backward passes add up"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        for _ in range(2):
            with Tape() as tape:
                loss = tsum(square(x))
            tape.backward(loss)
        np.testing.assert_array_equal(x.grad, [4.0, 8.0])

    def test_deterministic_gradients(self):
        """Test identical tapes give bitwise identical gradients"""
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(1, 6, 6)), requires_grad=True)
        k = Tensor(rng.normal(size=(2, 1, 3, 3)), requires_grad=True)
        grads = []
        for _ in range(2):
            with Tape() as tape:
                loss = tsum(square(relu(conv2d(x, k))))
            grads.append(tape.gradient(loss, [x, k]))
        for a, b in zip(*grads):
            assert np.array_equal(a, b)

    def test_shape_helpers_gradients(self):
        """Test reshape, getitem and concat backward rules"""
        rng = np.random.default_rng(5)
        a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 1, 4)), requires_grad=True)

        def loss():
            joined = concat([a, b], axis=1)
            picked = getitem(joined, (slice(None), slice(1, 4)))
            return tsum(square(reshape(picked, (6, 4))))

        assert check_gradients(loss, [a, b]) < 1e-6

    def test_small_network_gradient(self):
        """Test a two-layer conv net against finite differences"""
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(size=(1, 1, 6, 6)))
        k1 = Tensor(rng.normal(size=(3, 1, 3, 3)), requires_grad=True)
        k2 = Tensor(rng.normal(size=(1, 3, 3, 3)), requires_grad=True)
        assert check_gradients(lambda: tsum(square(conv2d(relu(conv2d(x, k1)), k2))), [k1, k2]) < 1e-4
