"""Unit tests for proxy data generation"""
import numpy as np
import pytest

from src.features.measurement import GaussianNoise
from src.features.tensor_core import Tape, add, parameter, scale, square, tsum
from src.features.training import make_proxy_batch
from src.shared.exceptions import ShapeMismatchError


class TestMakeProxyBatch:
    """Test x+ isolation and fresh sampling"""

    def test_gradient_isolated_from_prediction(self, blur_dist, rng):
        """Test losses on x+ send no gradient to the producing computation"""
        source = parameter(rng.uniform(size=blur_dist.image_shape), dtype=np.float64)
        with Tape() as tape:
            prediction = scale(source, 2.0)
            sample = make_proxy_batch([prediction], blur_dist, GaussianNoise(0.0), seed=0, step=0)[0]
            loss = add(tsum(prediction), tsum(square(sample.x_plus)))
        (grad,) = tape.gradient(loss, [source])
        assert not sample.x_plus.requires_grad
        np.testing.assert_array_equal(grad, np.full(source.shape, 2.0))
        np.testing.assert_array_equal(sample.x_plus.data, 2.0 * source.data)

    def test_y_plus_reproducible(self, cs_dist, rng):
        """Test y+ is rebuilt exactly from the stored fields"""
        x = parameter(rng.uniform(size=cs_dist.image_shape))
        sample = make_proxy_batch([x], cs_dist, GaussianNoise(0.05), seed=3, step=7)[0]
        np.testing.assert_array_equal(sample.regenerate().data, sample.y_plus.data)

    def test_steps_draw_new_parameters(self, blur_dist, rng):
        """Test different steps use different proxy operators"""
        xs = [parameter(rng.uniform(size=blur_dist.image_shape)) for _ in range(8)]
        first = make_proxy_batch(xs, blur_dist, GaussianNoise(0.0), seed=0, step=0)
        second = make_proxy_batch(xs, blur_dist, GaussianNoise(0.0), seed=0, step=1)
        assert not all(a.theta_plus.same_parameters(b.theta_plus) for a, b in zip(first, second))

    def test_same_step_reproducible(self, cs_dist, rng):
        """Test the same (seed, step) reproduces the batch"""
        x = parameter(rng.uniform(size=cs_dist.image_shape))
        a = make_proxy_batch([x, x], cs_dist, GaussianNoise(0.1), seed=5, step=2)
        b = make_proxy_batch([x, x], cs_dist, GaussianNoise(0.1), seed=5, step=2)
        for left, right in zip(a, b):
            assert left.theta_plus.same_parameters(right.theta_plus)
            np.testing.assert_array_equal(left.y_plus.data, right.y_plus.data)

    def test_cs_loss_weights_combine_masks(self, cs_dist, rng):
        """Test CS proxy weights are the proxy coverage times the source mask"""
        x = parameter(rng.uniform(size=cs_dist.image_shape))
        mask = np.zeros(cs_dist.image_shape)
        mask[:6] = 1.0
        sample = make_proxy_batch([x], cs_dist, GaussianNoise(0.0), seed=0, step=0, masks=[mask])[0]
        expected = sample.theta_plus.coverage_mask() * mask
        np.testing.assert_array_equal(sample.loss_weights(), expected)

    def test_wrong_prediction_shape(self, cs_dist):
        """Test a prediction of the wrong shape raises"""
        with pytest.raises(ShapeMismatchError):
            make_proxy_batch([parameter(np.zeros((5, 5)))], cs_dist, GaussianNoise(0.0), seed=0, step=0)

    def test_mask_count_mismatch(self, cs_dist):
        """Test one mask per prediction is required"""
        x = parameter(np.zeros(cs_dist.image_shape))
        with pytest.raises(ShapeMismatchError):
            make_proxy_batch([x], cs_dist, GaussianNoise(0.0), seed=0, step=0, masks=[None, None])
