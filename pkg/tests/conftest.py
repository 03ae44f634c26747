import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nmarreg import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_dataset(x, y, delta, z_coords=(1,), L=1.0):
    """Small-dataset builder; y entries at delta=0 are replaced by NaN."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1 and len(np.atleast_1d(y)) == x.shape[1]:
        x = x.T
    y = np.asarray(y, dtype=float).copy()
    delta = np.asarray(delta)
    y[delta == 0] = np.nan
    return Dataset(x=x, y=y, delta=delta, z_coords=z_coords, L=L)


@pytest.fixture
def dataset_builder():
    return make_dataset
