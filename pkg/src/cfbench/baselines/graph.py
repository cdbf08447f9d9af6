"""RP3beta: popularity-penalized three-step random walk."""

import numpy as np
import scipy.sparse as sp

from .base import ScoringModel, top_k_per_row


def _row_stochastic(m):
    m = sp.csr_matrix(m, dtype=np.float64)
    deg = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.diags(inv) @ m


class RP3beta(ScoringModel):
    name = "rp3beta"

    def _score(self, rows):
        return (self.arrays["walk_start"][rows] @ self.arrays["similarity"]).toarray()


def fit_rp3beta(train, topK=100, alpha=1.0, beta=0.5, block_size=512):
    """Item-item transition matrix of a user-item-user-item walk.

    Both transition matrices are raised elementwise to ``alpha``; the
    probability of landing on item ``j`` is divided by ``pop_j ** beta`` and
    each row is renormalized before keeping its ``topK`` entries. The
    diagonal is kept: returning to the start item is a valid walk.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    if topK < 1:
        raise ValueError("topK must be at least 1")
    x = train.csr
    n_items = x.shape[1]
    p_ui = _row_stochastic(x).power(alpha).tocsr()
    p_iu = _row_stochastic(x.T).power(alpha).tocsr()
    pop = train.col_counts().astype(np.float64)
    penalty = np.divide(1.0, np.power(pop, beta), out=np.zeros_like(pop), where=pop > 0)
    blocks = []
    for start in range(0, n_items, block_size):
        stop = min(start + block_size, n_items)
        w = (p_iu[start:stop] @ p_ui).toarray() * penalty[None, :]
        norm = w.sum(axis=1, keepdims=True)
        w = np.divide(w, norm, out=np.zeros_like(w), where=norm > 0)
        blocks.append(top_k_per_row(w, topK))
    sim = sp.vstack(blocks, format="csr")
    params = {"topK": int(topK), "alpha": float(alpha), "beta": float(beta)}
    return RP3beta(n_items, params, {"similarity": sim, "walk_start": p_ui})
