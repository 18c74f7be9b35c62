"""Unit tests for explicit operator families and the Gaussian prior"""
import numpy as np
import pytest

from src.features.measurement.gram import q_rank_report
from src.features.theory import GaussianImagePrior, OperatorFamily
from src.shared.exceptions import MeasurementError, SizeLimitError


class TestOperatorFamily:
    """Test family construction, padding and Q"""

    def test_compressive_offsets(self):
        """Test a 4x4 image with 2x2 patches yields the four shifted partitions"""
        family = OperatorFamily.compressive(4, 2, 2)
        assert len(family) == 4
        assert sorted(op.matrix.shape[0] for op in family.ops) == [2, 4, 4, 8]
        assert family.mean_rows() == pytest.approx(4.5)

    def test_padding_matches_operators(self):
        """Test padded stacks hold each matrix and zero rows beyond it"""
        family = OperatorFamily.compressive(4, 2, 2)
        for k, op in enumerate(family.ops):
            m = op.matrix.shape[0]
            np.testing.assert_array_equal(family.padded[k, :m], op.matrix)
            assert np.all(family.padded[k, m:] == 0.0)
            assert family.row_mask[k].sum() == m

    def test_gram_is_mean_of_products(self):
        """Test Q equals the average theta^T theta over the padded stack"""
        family = OperatorFamily.orthogonal(4, 8, 5, seed=2)
        expected = np.mean([theta.T @ theta for theta in family.padded], axis=0)
        np.testing.assert_allclose(family.gram(), expected, atol=1e-12)

    def test_orthogonal_rows(self):
        """Test every orthogonal member has orthonormal rows"""
        family = OperatorFamily.orthogonal(4, 8, 3)
        for op in family.ops:
            np.testing.assert_allclose(op.matrix @ op.matrix.T, np.eye(8), atol=1e-12)

    def test_orthogonal_family_full_rank(self):
        """Test many random members cover every image direction"""
        assert q_rank_report(OperatorFamily.orthogonal(4, 8, 64).gram()).full_rank

    def test_fixed_operator_rank_deficient(self):
        """Test a single 8-row operator on 16 pixels leaves an 8-dim null space"""
        report = q_rank_report(OperatorFamily.fixed(4, 8).gram())
        assert report.rank == 8 and report.null_dim == 8

    def test_build_matches_measurement_count(self):
        """Test non-compressive families use measurements * patches rows"""
        family = OperatorFamily.build("orthogonal", 4, 2, 2, family_size=3)
        assert all(op.matrix.shape == (8, 16) for op in family.ops)

    def test_unknown_kind(self):
        """Test an unknown family name raises"""
        with pytest.raises(MeasurementError):
            OperatorFamily.build("radon", 4, 2, 2, family_size=3)

    def test_size_limit(self):
        """Test families beyond 256 pixels are refused"""
        with pytest.raises(SizeLimitError):
            OperatorFamily.fixed(17, 4)


class TestGaussianImagePrior:
    """Test prior samples and closed-form quadratic expectations"""

    def test_sample_statistics(self, rng):
        """Test sample mean and covariance match the prior"""
        prior = GaussianImagePrior(4, bandwidth=1.5)
        samples = prior.sample(rng, 50_000)
        np.testing.assert_allclose(samples.mean(axis=0), prior.mean, atol=0.01)
        np.testing.assert_allclose(np.cov(samples.T), prior.covariance, atol=3e-3)

    def test_nearby_pixels_correlated(self):
        """Test covariance decays with pixel distance"""
        prior = GaussianImagePrior(4, bandwidth=1.5)
        assert prior.covariance[0, 1] > prior.covariance[0, 2] > prior.covariance[0, 3] > 0

    def test_quadratic_expectation_identity(self):
        """Test E[x^T x] = tr(Sigma) + |mu|^2"""
        prior = GaussianImagePrior(4, mean=0.5, std=0.2)
        assert prior.quadratic_expectation(np.eye(16)) == pytest.approx(16 * 0.04 + 16 * 0.25)

    def test_quadratic_expectation_monte_carlo(self, rng):
        """Test the closed form against sampled x^T Q x"""
        prior = GaussianImagePrior(4)
        q = OperatorFamily.compressive(4, 2, 2).gram()
        samples = prior.sample(rng, 100_000)
        empirical = np.einsum("sn,nk,sk->s", samples, q, samples).mean()
        assert empirical == pytest.approx(prior.quadratic_expectation(q), rel=0.01)
