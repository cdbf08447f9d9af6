import os

import numpy as np
import pytest

from cfbench.dataset import InteractionMatrix

DATA_ROOT = os.environ.get("CFBENCH_DATA", "/root/data")
ML100K = os.path.join(DATA_ROOT, "ml-100k", "u.data")
ML1M = os.path.join(DATA_ROOT, "ml-1m", "ratings.dat")


def random_binary(rng, n_rows, n_cols, density=0.3, min_per_row=1):
    """Random binary matrix where every row has at least ``min_per_row`` entries."""
    x = (rng.random((n_rows, n_cols)) < density).astype(np.float64)
    for r in range(n_rows):
        if x[r].sum() < min_per_row:
            x[r, rng.choice(n_cols, size=min_per_row, replace=False)] = 1.0
    return x


def as_matrix(dense):
    return InteractionMatrix(np.asarray(dense, dtype=np.float64))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
