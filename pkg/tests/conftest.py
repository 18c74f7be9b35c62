"""Pytest configuration and shared fixtures"""
import numpy as np
import pytest

from src.shared.config import settings
from tests.utils import TestDataFactory


def pytest_collection_modifyitems(config, items):
    """Skip desk-scale experiments unless PAIRWISE_RUN_SLOW=1"""
    if settings.run_slow_tests:
        return
    skip_slow = pytest.mark.skip(reason="slow experiment; set PAIRWISE_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test inputs"""
    return np.random.default_rng(1234)


@pytest.fixture
def cs_dist():
    """12x12 images, 4x4 patches, 4 measurements per patch"""
    return TestDataFactory.cs_distribution()


@pytest.fixture
def blur_dist():
    """16x16 images, 3x3 motion kernels"""
    return TestDataFactory.blur_distribution()


@pytest.fixture
def cs_dataset(cs_dist):
    """Eight noise-free compressive pairs with ground truth"""
    return TestDataFactory.pair_dataset(cs_dist, count=8)


@pytest.fixture
def blur_dataset(blur_dist):
    """Eight noisy blur pairs with operators"""
    return TestDataFactory.pair_dataset(blur_dist, count=8, sigma=0.01)


@pytest.fixture
def blind_dataset(blur_dist):
    """Eight noisy blur pairs without operators"""
    return TestDataFactory.pair_dataset(blur_dist, count=8, sigma=0.01, blind=True)
