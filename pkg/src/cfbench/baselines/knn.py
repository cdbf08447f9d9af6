"""Neighborhood models with shrunk similarities and top-K pruning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .base import ProfileModel, top_k_per_row

SIMILARITIES = ("cosine", "dice", "jaccard", "asymmetric", "tversky")


@dataclass(frozen=True)
class SimilarityConfig:
    kind: str = "cosine"
    shrink: float = 0.0
    topK: int = 100
    asymmetric_alpha: float = 0.5
    tversky_alpha: float = 1.0
    tversky_beta: float = 1.0

    def __post_init__(self):
        if self.kind not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.kind!r}; expected one of {SIMILARITIES}")
        if self.shrink < 0:
            raise ValueError("shrink must be non-negative")
        if self.topK < 1:
            raise ValueError("topK must be at least 1")
        if not 0 <= self.asymmetric_alpha <= 2:
            raise ValueError("asymmetric_alpha must lie in [0, 2]")
        if not (0 <= self.tversky_alpha <= 2 and 0 <= self.tversky_beta <= 2):
            raise ValueError("tversky alpha/beta must lie in [0, 2]")


def _block_similarity(dot, sq_target, sq_all, cfg):
    """Similarity of target vectors (rows of ``dot``) against all vectors.

    ``dot[a, b]`` is the inner product, ``sq_*`` the squared norms, which for
    binary vectors equal the set sizes.
    """
    shrink = cfg.shrink
    t = sq_target[:, None]
    a = sq_all[None, :]
    if cfg.kind == "cosine":
        denom = np.sqrt(t) * np.sqrt(a) + shrink
        num = dot
    elif cfg.kind == "asymmetric":
        alpha = cfg.asymmetric_alpha
        denom = np.power(t, alpha) * np.power(a, 1.0 - alpha) + shrink
        num = dot
    elif cfg.kind == "jaccard":
        denom = t + a - dot + shrink
        num = dot
    elif cfg.kind == "dice":
        denom = t + a + shrink
        num = 2.0 * dot
    else:  # tversky
        denom = dot + cfg.tversky_alpha * (t - dot) + cfg.tversky_beta * (a - dot) + shrink
        num = dot
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(dot > 0, num / denom, 0.0)
    return np.nan_to_num(sim, nan=0.0, posinf=0.0, neginf=0.0)


def compute_similarity(vectors, cfg, block_size=512):
    """Row-wise top-K similarity between the columns of ``vectors``.

    ``vectors`` is a sparse (features x entities) matrix; the result is an
    (entities x entities) CSR matrix whose row ``i`` holds the ``topK`` most
    similar other entities of ``i``. The diagonal is always zero.
    """
    vectors = sp.csc_matrix(vectors, dtype=np.float64)
    n = vectors.shape[1]
    if cfg.topK > n:
        raise ValueError(f"topK={cfg.topK} exceeds the number of entities ({n})")
    sq = np.asarray(vectors.multiply(vectors).sum(axis=0)).ravel()
    gram_rows = vectors.T.tocsr()
    blocks = []
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        dot = (gram_rows[start:stop] @ vectors).toarray()
        sim = _block_similarity(dot, sq[start:stop], sq, cfg)
        sim[np.arange(stop - start), np.arange(start, stop)] = 0.0
        blocks.append(top_k_per_row(sim, cfg.topK))
    return sp.vstack(blocks, format="csr")


class ItemKNN(ProfileModel):
    name = "itemknn"

    def _score(self, rows):
        # row i of the similarity holds neighbours of target item i
        return (self.profiles[rows] @ self.arrays["similarity"].T).toarray()


class UserKNN(ProfileModel):
    name = "userknn"

    def _score(self, rows):
        return (self.arrays["similarity"][rows] @ self.profiles).toarray()


def fit_knn(train, cfg, direction="item"):
    """Item- or user-based neighbourhood model on binary interactions."""
    x = train.csr
    params = {"direction": direction, **cfg.__dict__}
    if direction == "item":
        sim = compute_similarity(x, cfg)
        return ItemKNN(train, train.num_cols, params, {"similarity": sim})
    if direction == "user":
        sim = compute_similarity(x.T, cfg)
        return UserKNN(train, train.num_cols, params, {"similarity": sim})
    raise ValueError(f"direction must be 'item' or 'user', got {direction!r}")
