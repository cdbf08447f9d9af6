"""Matrix-factorization baselines: PureSVD and BPR-optimized MF."""

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .. import kernels
from .base import ScoringModel

# below this many cells a dense SVD is cheaper and exact
_DENSE_SVD_CELLS = 4_000_000


class FactorModel(ScoringModel):
    """Scores are ``users[rows] @ items.T``."""

    def _score(self, rows):
        return self.arrays["users"][rows] @ self.arrays["items"].T


class PureSVD(FactorModel):
    name = "puresvd"


class MatrixFactorizationBPR(FactorModel):
    name = "mf_bpr"


def truncated_svd(x, rank, seed=0):
    """Leading ``rank`` singular triplets of ``x``, singular values descending."""
    m, n = x.shape
    if not 1 <= rank <= min(m, n):
        raise ValueError(f"rank must lie in [1, {min(m, n)}], got {rank}")
    if rank >= min(m, n) - 1 or m * n <= _DENSE_SVD_CELLS:
        dense = x.toarray() if sp.issparse(x) else np.asarray(x, dtype=np.float64)
        u, s, vt = la.svd(dense, full_matrices=False, lapack_driver="gesdd")
        return u[:, :rank], s[:rank], vt[:rank]
    v0 = np.random.default_rng(seed).uniform(-1.0, 1.0, min(m, n))
    u, s, vt = svds(sp.csr_matrix(x, dtype=np.float64), k=rank, v0=v0)
    order = np.argsort(-s, kind="stable")
    return u[:, order], s[order], vt[order]


def fit_puresvd(train, rank, seed=0):
    u, s, vt = truncated_svd(train.csr, int(rank), seed=seed)
    return PureSVD(train.num_cols, {"rank": int(rank), "seed": int(seed)},
                   {"users": u * s[None, :], "items": vt.T.copy(), "singular_values": s})


def sample_triples(x, rng):
    """One epoch of (user, positive, negative) triples.

    Positives are the observed pairs in random order; each negative is drawn
    uniformly among the user's unobserved items by rejection.
    """
    n_users, n_items = x.shape
    lengths = np.diff(x.indptr)
    users_all = np.repeat(np.arange(n_users, dtype=np.int64), lengths)
    # users who saw every item admit no negative
    ok = lengths[users_all] < n_items
    order = rng.permutation(int(ok.sum()))
    users = users_all[ok][order]
    pos = x.indices.astype(np.int64)[ok][order]
    keys = np.sort(users_all * n_items + x.indices.astype(np.int64))
    neg = rng.integers(0, n_items, size=len(users))
    todo = np.arange(len(users))
    while len(todo):
        k = users[todo] * n_items + neg[todo]
        hit = np.searchsorted(keys, k)
        hit = np.minimum(hit, len(keys) - 1)
        clash = keys[hit] == k
        todo = todo[clash]
        neg[todo] = rng.integers(0, n_items, size=len(todo))
    return np.ascontiguousarray(users), np.ascontiguousarray(pos), np.ascontiguousarray(neg, dtype=np.int64)


def fit_mf_bpr(train, factors=10, lr=0.05, reg=1e-4, epochs=30, seed=0, backend=None):
    """Matrix factorization trained by SGD on the BPR pairwise loss.

    Each epoch visits every observed pair once with a fresh negative. The
    loss per epoch is kept in ``model.info["loss"]``.
    """
    if factors < 1:
        raise ValueError("factors must be at least 1")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    impl = kernels.get_backend(backend)
    x = train.csr
    rng = np.random.default_rng(seed)
    p = rng.normal(0.0, 0.1, (x.shape[0], int(factors)))
    q = rng.normal(0.0, 0.1, (x.shape[1], int(factors)))
    losses = []
    for epoch in range(int(epochs)):
        users, pos, neg = sample_triples(x, rng)
        loss = impl.bpr_epoch(p, q, users, pos, neg, float(lr), float(reg))
        if not (np.isfinite(loss) and np.isfinite(p).all() and np.isfinite(q).all()):
            raise FloatingPointError(f"BPR diverged at epoch {epoch + 1} (lr={lr})")
        losses.append(loss / max(len(users), 1))
    params = {"factors": int(factors), "lr": float(lr), "reg": float(reg),
              "epochs": int(epochs), "seed": int(seed)}
    model = MatrixFactorizationBPR(train.num_cols, params, {"users": p, "items": q})
    model.info["loss"] = losses
    return model
