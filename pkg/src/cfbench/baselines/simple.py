"""Non-personalized baselines."""

import numpy as np

from .base import ScoringModel


class TopPop(ScoringModel):
    name = "toppop"

    def _score(self, rows):
        return np.broadcast_to(self.arrays["popularity"], (len(rows), self.n_items))


class RandomModel(ScoringModel):
    name = "random"

    def _score(self, rows):
        seed = int(self.params["seed"])
        # one generator per row keeps a row's ranking independent of batching
        return np.stack([np.random.default_rng([seed, int(r)]).random(self.n_items) for r in rows])


def fit_toppop(train):
    """Score every item by its interaction count, identically for all rows."""
    return TopPop(train.num_cols, {}, {"popularity": train.col_counts()})


def fit_random(train, seed=0):
    return RandomModel(train.num_cols, {"seed": int(seed)})
