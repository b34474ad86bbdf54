from pathlib import Path

import numpy as np
import pytest

from credamp.ingest import LabeledDataset

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def default_corpus() -> Path:
    return FIXTURES / "default"


def make_dataset(n_low=200, n_high=800, uplift=1.0, seed=0, **extra) -> LabeledDataset:
    """Small log-normal dataset where Low impressions are scaled by ``uplift``."""
    rng = np.random.default_rng(seed)
    n = n_low + n_high
    is_low = np.zeros(n, bool)
    is_low[:n_low] = True
    followers = rng.lognormal(5, 1.2, n).astype(np.int64)
    base = np.exp(5 + 0.4 * np.log1p(followers) + 0.5 * rng.standard_normal(n))
    engagement = rng.poisson(0.03 * base)
    impressions = np.rint(base * np.where(is_low, uplift, 1.0))
    return LabeledDataset.from_columns(impressions, engagement, followers, is_low, **extra)


@pytest.fixture
def small_dataset() -> LabeledDataset:
    return make_dataset()
