"""Unit tests for measurement operators and noise"""
import numpy as np
import pytest

from src.features.measurement import (
    CompressivePatchOp,
    ConvolutionOp,
    GaussianNoise,
    MatrixOp,
    adjoint_input,
    measure,
    orthonormal_rows,
)
from src.features.measurement.kernels import random_walk_kernel
from src.features.tensor_core import Tape, Tensor, tsum, square
from src.shared.exceptions import MeasurementError, ShapeMismatchError, SizeLimitError


def _delta(size=3):
    kernel = np.zeros((size, size))
    kernel[size // 2, size // 2] = 1.0
    return kernel


def _operators(rng):
    """One operator of every kind on 12x12 images"""
    phi = orthonormal_rows(4, 16, seed=3)
    kernel = random_walk_kernel(5, 5, 0.8, rng)
    return [
        CompressivePatchOp(phi, (12, 12), offset=(1, 3)),
        ConvolutionOp(kernel, (12, 12), boundary="zero"),
        ConvolutionOp(kernel, (12, 12), boundary="circular"),
        MatrixOp(rng.normal(size=(20, 144)), (12, 12)),
    ]


class TestMeasure:
    """Test theta x + eps"""

    def test_identity_like_patch_op(self):
        """Test m = p^2 with phi = I returns the image"""
        x = np.random.default_rng(0).uniform(size=(8, 8))
        op = CompressivePatchOp(np.eye(16), (8, 8))
        y = measure(op, x, GaussianNoise(0.0), seed=0)
        np.testing.assert_allclose(op.adjoint(y.data), x)

    def test_delta_kernel_blur(self):
        """Test a delta kernel leaves the image unchanged"""
        x = np.random.default_rng(1).uniform(size=(9, 9))
        y = measure(ConvolutionOp(_delta(), (9, 9)), x, GaussianNoise(0.0), seed=0)
        np.testing.assert_allclose(y.data, x)

    def test_single_row_projection(self):
        """Test a hand-computed projection (1 + 3) / sqrt(2)"""
        op = MatrixOp(np.array([[1.0, 1.0]]) / np.sqrt(2.0), (1, 2))
        y = measure(op, np.array([[1.0, 3.0]]), GaussianNoise(0.0), seed=0)
        np.testing.assert_allclose(y.data, [2.8284271], rtol=1e-7)

    def test_noise_is_seeded(self):
        """Test identical seeds give identical noise and different seeds differ"""
        op = ConvolutionOp(_delta(), (6, 6))
        x = np.zeros((6, 6))
        noise = GaussianNoise(2.0 / 255.0)
        a, b, c = (measure(op, x, noise, seed=s).data for s in (7, 7, 8))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_dimension_mismatch(self):
        """Test an image of the wrong size is rejected"""
        with pytest.raises(ShapeMismatchError):
            measure(ConvolutionOp(_delta(), (6, 6)), np.zeros((5, 6)), GaussianNoise(0.0), seed=0)

    def test_negative_sigma_rejected(self):
        """Test noise sigma must be nonnegative"""
        with pytest.raises(MeasurementError):
            GaussianNoise(-0.1)

    @pytest.mark.parametrize("seed", range(10))
    def test_linearity(self, seed):
        """Test measure(ax + by) = a measure(x) + b measure(y) at sigma 0"""
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=2)
        x, z = rng.uniform(size=(2, 12, 12))
        for op in _operators(rng):
            lhs = op.apply(a * x + b * z)
            rhs = a * op.apply(x) + b * op.apply(z)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-12)


class TestAdjoint:
    """Test theta^T"""

    def test_identity_adjoint(self):
        """Test the identity-like operator returns y"""
        y = np.random.default_rng(2).normal(size=(4, 16))
        op = CompressivePatchOp(np.eye(16), (8, 8))
        np.testing.assert_allclose(op.apply(adjoint_input(op, y).data), y)

    def test_delta_kernel_adjoint(self):
        """Test delta-kernel blur adjoint is the identity"""
        y = np.random.default_rng(3).normal(size=(7, 7))
        np.testing.assert_allclose(adjoint_input(ConvolutionOp(_delta(), (7, 7)), y).data, y)

    @pytest.mark.parametrize("seed", range(10))
    def test_inner_products(self, seed):
        """Test <theta x, y> = <x, theta^T y> for every operator kind"""
        rng = np.random.default_rng(seed)
        for op in _operators(rng):
            x = rng.normal(size=op.image_shape)
            y = rng.normal(size=op.measurement_shape)
            lhs = float(np.sum(op.apply(x) * y))
            rhs = float(np.sum(x * op.adjoint(y)))
            assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1e-12)

    def test_adjoint_shape_mismatch(self):
        """Test measurements of the wrong shape are rejected"""
        op = CompressivePatchOp(orthonormal_rows(4, 16, seed=0), (8, 8))
        with pytest.raises(ShapeMismatchError):
            adjoint_input(op, np.zeros((3, 4)))


class TestCompressivePatchOp:
    """Test patch projections"""

    def test_orthonormal_rows(self):
        """Test generated phi has orthonormal rows"""
        phi = orthonormal_rows(16, 64, seed=11)
        np.testing.assert_allclose(phi @ phi.T, np.eye(16), atol=1e-6)

    def test_rejects_non_orthonormal(self):
        """Test a non-orthonormal phi is rejected"""
        with pytest.raises(MeasurementError):
            CompressivePatchOp(np.ones((2, 4)), (4, 4))

    def test_rejects_more_rows_than_pixels(self):
        """Test m must not exceed p^2"""
        with pytest.raises(MeasurementError):
            CompressivePatchOp(np.eye(5, 4), (4, 4))

    def test_patch_count_with_offset(self):
        """Test a 12x12 image at offset (1, 3) with p=4 holds 2x2 patches"""
        op = CompressivePatchOp(orthonormal_rows(4, 16, seed=0), (12, 12), offset=(1, 3))
        assert op.grid == (2, 2)
        assert op.measurement_shape == (4, 4)

    def test_extract_place_inverse_on_coverage(self):
        """Test placing extracted patches restores covered pixels"""
        x = np.random.default_rng(4).normal(size=(12, 12))
        op = CompressivePatchOp(np.eye(16), (12, 12), offset=(2, 1))
        restored = op.place_patches(op.extract_patches(x))
        mask = op.coverage_mask()
        np.testing.assert_array_equal(restored[mask], x[mask])
        assert np.all(restored[~mask] == 0)

    def test_loss_weights_drop_uncovered_patches(self):
        """Test patches reaching outside the source coverage get zero weight"""
        phi = orthonormal_rows(4, 16, seed=0)
        target = CompressivePatchOp(phi, (12, 12), offset=(0, 0))
        source = CompressivePatchOp(phi, (12, 12), offset=(2, 2))
        weights = target.loss_weights(source)
        assert weights.shape == target.measurement_shape
        # only the center patch [4, 8)^2 lies inside [2, 10)^2
        np.testing.assert_array_equal(weights[:, 0], [0, 0, 0, 0, 1, 0, 0, 0, 0])
        assert np.all(target.loss_weights(target) == 1.0)

    def test_to_image_gradient_matches_extract(self):
        """Test patch assembly is differentiable"""
        op = CompressivePatchOp(orthonormal_rows(4, 16, seed=0), (8, 8))
        patches = Tensor(np.random.default_rng(5).normal(size=(4, 1, 4, 4)), requires_grad=True)
        with Tape() as tape:
            loss = tsum(square(op.to_image(patches)))
        (grad,) = tape.gradient(loss, [patches])
        np.testing.assert_allclose(grad, 2.0 * patches.data)

    def test_materialize_size_limit(self, monkeypatch):
        """Test materialization beyond the limit raises"""
        from src.shared.config import settings

        monkeypatch.setattr(settings, "max_materialize_dim", 100)
        with pytest.raises(SizeLimitError):
            CompressivePatchOp(np.eye(16), (12, 12)).materialize()


class TestConvolutionOp:
    """Test blur operators"""

    def test_invalid_kernels(self):
        """Test even, negative and unnormalized kernels are rejected"""
        with pytest.raises(MeasurementError):
            ConvolutionOp(np.full((2, 2), 0.25), (8, 8))
        with pytest.raises(MeasurementError):
            ConvolutionOp(np.array([[0.0, -0.5, 1.5]]).reshape(1, 3), (8, 8))
        with pytest.raises(MeasurementError):
            ConvolutionOp(np.full((3, 3), 0.2), (8, 8))

    def test_true_convolution_orientation(self):
        """Test an off-center tap shifts the image along the kernel direction"""
        kernel = np.zeros((3, 3))
        kernel[2, 1] = 1.0
        x = np.zeros((5, 5))
        x[2, 2] = 1.0
        y = ConvolutionOp(kernel, (5, 5)).apply(x)
        assert y[3, 2] == 1.0

    def test_preserves_constant_interior(self):
        """Test blur keeps constant images constant away from the boundary"""
        rng = np.random.default_rng(6)
        op = ConvolutionOp(random_walk_kernel(5, 5, 0.8, rng), (12, 12))
        y = op.apply(np.full((12, 12), 0.3))
        np.testing.assert_allclose(y[2:-2, 2:-2], 0.3)

    @pytest.mark.parametrize("boundary", ["zero", "circular"])
    def test_forward_tensor_matches_apply(self, boundary):
        """Test the differentiable path equals the array path"""
        rng = np.random.default_rng(7)
        op = ConvolutionOp(random_walk_kernel(5, 5, 0.8, rng), (10, 10), boundary=boundary)
        x = rng.normal(size=(10, 10))
        np.testing.assert_allclose(op.forward_tensor(Tensor(x)).data, op.apply(x), atol=1e-12)

    def test_live_kernel_tensor_receives_gradient(self):
        """Test an attached kernel tensor is differentiated through"""
        rng = np.random.default_rng(8)
        kernel = random_walk_kernel(3, 3, 0.8, rng)
        live = Tensor(kernel.copy(), requires_grad=True)
        op = ConvolutionOp(kernel, (6, 6), kernel_tensor=live)
        x = Tensor(rng.normal(size=(6, 6)))
        with Tape() as tape:
            loss = tsum(square(op.forward_tensor(x)))
        (grad,) = tape.gradient(loss, [live])
        assert np.any(grad != 0)

    def test_interior_loss_mask(self):
        """Test zero-boundary loss weights cover only the interior"""
        op = ConvolutionOp(np.full((3, 3), 1.0 / 9.0), (6, 6))
        mask = op.loss_weights()
        assert mask.sum() == 16
        assert ConvolutionOp(np.full((3, 3), 1.0 / 9.0), (6, 6), boundary="circular").loss_weights() is None
