"""Unit tests for random-walk blur kernels"""
import numpy as np
import pytest

from src.features.measurement import ParamDistribution, kernel_spectrum, random_walk_kernel, sample_motion_kernel
from src.shared.exceptions import MeasurementError


class TestRandomWalkKernel:
    """Test kernel generation"""

    def test_zero_length_is_delta(self):
        """Test a zero walk length gives a centered delta"""
        kernel = random_walk_kernel(5, 0, 0.8, np.random.default_rng(0))
        expected = np.zeros((5, 5))
        expected[2, 2] = 1.0
        np.testing.assert_allclose(kernel, expected)

    @pytest.mark.parametrize("seed", range(100))
    def test_normalized_and_nonnegative(self, seed):
        """Test every kernel is a probability mass on its support"""
        kernel = random_walk_kernel(7, 7, 0.8, np.random.default_rng(seed))
        assert kernel.shape == (7, 7)
        assert np.all(kernel >= 0)
        assert abs(kernel.sum() - 1.0) < 1e-6

    def test_invalid_arguments(self):
        """Test even sizes and negative lengths are rejected"""
        with pytest.raises(MeasurementError):
            random_walk_kernel(4, 3, 0.8, np.random.default_rng(0))
        with pytest.raises(MeasurementError):
            random_walk_kernel(5, -1, 0.8, np.random.default_rng(0))

    def test_default_walk_fits_kernel(self):
        """Test the default walk length bound is kernel_size - 1"""
        assert ParamDistribution.motion(5, (16, 16)).max_walk_length == 4
        assert ParamDistribution.motion(5, (16, 16), max_walk_length=9).max_walk_length == 9

    @pytest.mark.parametrize("seed", range(20))
    def test_long_walks_not_piled_on_border(self, seed):
        """Test walks longer than the window are shrunk instead of clipped to the border"""
        rng = np.random.default_rng(seed)
        kernel = random_walk_kernel(5, 40, 0.0, rng)
        border = kernel.sum() - kernel[1:-1, 1:-1].sum()
        assert border < 0.6
        assert abs(kernel.sum() - 1.0) < 1e-6

    def test_seeded(self):
        """Test identical generators give identical kernels"""
        dist = ParamDistribution.motion(5, (16, 16), seed=0)
        a = sample_motion_kernel(dist, 42).kernel
        b = sample_motion_kernel(dist, 42).kernel
        np.testing.assert_array_equal(a, b)

    def test_wrong_family(self):
        """Test sample_motion_kernel needs a motion-kernel distribution"""
        dist = ParamDistribution.compressive(np.eye(4), (8, 8))
        with pytest.raises(MeasurementError):
            sample_motion_kernel(dist, 0)

    def test_unknown_family(self):
        """Test a family outside the known set is rejected by name"""
        with pytest.raises(MeasurementError, match="expected one of cs-shifted-partitions, motion-kernels"):
            ParamDistribution(family="radon", image_shape=(8, 8))


class TestKernelSpectrum:
    """Test Fourier coverage of kernel families"""

    def test_box_kernel_vanishes_at_nyquist(self):
        """Test a 1x2 box kernel is blind at the highest horizontal frequency"""
        magnitudes, average = kernel_spectrum([np.array([[0.5, 0.5]])], shape=(1, 8))
        assert magnitudes.shape == (1, 1, 8)
        assert average[0, 4] < 1e-12
        np.testing.assert_allclose(average[0, 0], 1.0)

    def test_random_walk_family_covers_all_frequencies(self):
        """Test averaged spectrum of 1000 kernels stays away from zero"""
        rng = np.random.default_rng(0)
        kernels = [random_walk_kernel(5, 5, 0.8, rng) for _ in range(1000)]
        _, average = kernel_spectrum(kernels, shape=(16, 16))
        assert average.min() > 0.05 * average.max()

    def test_empty_family(self):
        """Test an empty kernel list is rejected"""
        with pytest.raises(MeasurementError):
            kernel_spectrum([])

    def test_kernel_larger_than_grid(self):
        """Test kernels must fit the requested spectrum shape"""
        with pytest.raises(MeasurementError):
            kernel_spectrum([np.ones((5, 5)) / 25.0], shape=(4, 4))
