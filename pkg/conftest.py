"""Shared fixtures for the rsentropy test suite."""

import os

import numpy as np
import pytest

from rsentropy.designs import Design, draw_mrss
from rsentropy.parents import BivariateNormal

ROOT = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture
def body_fat_path():
    return os.path.join(ROOT, 'datasets', 'body_fat_drss', 'sample.csv')


@pytest.fixture
def rss_sample():
    """A bivariate RSS sample ranked on the second coordinate (k=3, m=10)."""
    return draw_mrss(BivariateNormal(0.9), Design(k=3, m=10, r=1, rank_by=1), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
