"""Unit tests for shifted patch partitions"""
import numpy as np
import pytest

from src.features.measurement import CompressivePatchOp, orthonormal_rows, shifted_partitions
from src.features.measurement.partitions import all_offsets, partition_grid, sample_offset_pair
from src.shared.exceptions import MeasurementError


class TestPartitions:
    """Test offsets and grids"""

    def test_all_offsets(self):
        """Test p^2 offsets in row-major order"""
        offsets = all_offsets(3)
        assert len(offsets) == 9
        assert offsets[0] == (0, 0)
        assert offsets[5] == (1, 2)

    def test_grid_counts_complete_patches(self):
        """Test only complete patches are counted"""
        assert partition_grid((12, 12), 4, (0, 0)) == (3, 3)
        assert partition_grid((12, 12), 4, (1, 3)) == (2, 2)
        assert partition_grid((13, 12), 4, (1, 0)) == (3, 3)

    @pytest.mark.parametrize("seed", range(50))
    def test_offset_pairs_are_distinct(self, seed):
        """Test the two sampled offsets always differ"""
        first, second = sample_offset_pair((12, 12), 4, np.random.default_rng(seed))
        assert first != second
        assert all(0 <= v < 4 for v in first + second)

    def test_offsets_cover_every_pair(self):
        """Test the sampler eventually draws both orders of a pair"""
        rng = np.random.default_rng(0)
        seen = {sample_offset_pair((4, 4), 2, rng) for _ in range(500)}
        assert len(seen) == 12

    def test_seeded_partitions(self):
        """Test shifted_partitions is a function of its seed"""
        assert shifted_partitions((12, 12), 4, seed=5) == shifted_partitions((12, 12), 4, seed=5)

    def test_single_offset_patch_size_rejected(self):
        """Test p = 1 cannot produce two distinct partitions"""
        with pytest.raises(MeasurementError):
            shifted_partitions((12, 12), 1, seed=0)

    def test_image_too_small(self):
        """Test images smaller than two patches are rejected"""
        with pytest.raises(MeasurementError):
            shifted_partitions((6, 6), 4, seed=0)

    def test_each_pixel_in_at_most_one_patch(self):
        """Test patches of a partition never overlap"""
        phi = orthonormal_rows(4, 16, seed=0)
        for offset in all_offsets(4):
            op = CompressivePatchOp(phi, (12, 12), offset=offset)
            counts = op.place_patches(np.ones((op.n_patches, 16)))
            assert counts.max() == 1.0
            assert counts.sum() == 16 * op.n_patches

    def test_interior_pixel_covered_by_both_partitions(self):
        """Test pixels away from the border lie in one patch of each offset"""
        phi = orthonormal_rows(4, 16, seed=0)
        a = CompressivePatchOp(phi, (12, 12), offset=(0, 0)).coverage_mask()
        b = CompressivePatchOp(phi, (12, 12), offset=(2, 2)).coverage_mask()
        assert np.all((a & b)[2:10, 2:10])
        assert not np.any(b[10:, :])
