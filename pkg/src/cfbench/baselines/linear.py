"""Linear item-item models: EASE-R and SLIM ElasticNet."""

import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .. import kernels
from .base import ProfileModel, top_k_per_row


class ItemWeightModel(ProfileModel):
    """Scores are ``profiles[rows] @ weights``."""

    def _score(self, rows):
        w = self.arrays["weights"]
        out = self.profiles[rows] @ w
        return out.toarray() if sp.issparse(out) else np.asarray(out)


class EASE(ItemWeightModel):
    name = "ease_r"


class SLIMElasticNet(ItemWeightModel):
    name = "slim_elasticnet"


class ConvergenceWarning(UserWarning):
    pass


def fit_ease_r(train, l2=500.0):
    """Closed-form ridge autoencoder with a zero-diagonal constraint."""
    if not l2 > 0:
        raise ValueError("l2 must be positive")
    x = train.csr
    gram = (x.T @ x).toarray()
    gram[np.diag_indices_from(gram)] += l2
    try:
        c, low = la.cho_factor(gram, lower=True)
    except la.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"EASE-R system is singular: {exc}") from exc
    p = la.cho_solve((c, low), np.eye(gram.shape[0]))
    b = -p / np.diag(p)[None, :]
    np.fill_diagonal(b, 0.0)
    return EASE(train, train.num_cols, {"l2": float(l2)}, {"weights": b})


def fit_slim_elasticnet(train, l1_ratio=0.1, alpha=1e-3, topK=100, max_iter=100, tol=1e-4,
                        backend=None):
    """Per-item non-negative elastic net with a zero self-weight.

    Column ``j`` is regressed on the other columns minimizing
    ``1/(2n)||x_j - X w||^2 + alpha*l1_ratio*|w|_1 + alpha*(1-l1_ratio)/2*||w||^2``
    with ``w >= 0``. Only items that co-occur with ``j`` can get a positive
    weight, so the others are skipped. Columns that hit ``max_iter`` keep
    their last iterate and are counted in ``model.info["not_converged"]``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 <= l1_ratio <= 1:
        raise ValueError("l1_ratio must lie in [0, 1]")
    if topK < 1:
        raise ValueError("topK must be at least 1")
    impl = kernels.get_backend(backend)
    x = train.csr
    n_rows, n_items = x.shape
    csc = x.tocsc()
    col_ptr = csc.indptr.astype(np.int64)
    col_rows = csc.indices.astype(np.int64)
    col_sq = np.diff(col_ptr).astype(np.float64)
    gram = (csc.T @ csc).tocsr()
    l1_pen = n_rows * alpha * l1_ratio
    l2_pen = n_rows * alpha * (1.0 - l1_ratio)
    cols, rows, vals = [], [], []
    failed = 0
    for j in range(n_items):
        cand = gram.indices[gram.indptr[j]:gram.indptr[j + 1]].astype(np.int64)
        cand = np.ascontiguousarray(cand[cand != j])
        if len(cand) == 0:
            continue
        resid = np.zeros(n_rows)
        resid[col_rows[col_ptr[j]:col_ptr[j + 1]]] = 1.0
        w = np.zeros(len(cand))
        _, converged = impl.elastic_net_cd(col_ptr, col_rows, col_sq, cand, w, resid,
                                           l1_pen, l2_pen, int(max_iter), float(tol))
        failed += not converged
        nz = w > 0
        if nz.sum() > topK:
            kept = top_k_per_row(w[None, :], topK)
            nz = np.zeros(len(w), dtype=bool)
            nz[kept.indices] = True
        rows.append(cand[nz])
        vals.append(w[nz])
        cols.append(np.full(int(nz.sum()), j, dtype=np.int64))
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    weights = sp.csr_matrix((v, (r, c)), shape=(n_items, n_items))
    if failed:
        warnings.warn(f"SLIM: {failed} of {n_items} columns did not converge in {max_iter} sweeps",
                      ConvergenceWarning, stacklevel=2)
    params = {"l1_ratio": float(l1_ratio), "alpha": float(alpha), "topK": int(topK),
              "max_iter": int(max_iter), "tol": float(tol)}
    model = SLIMElasticNet(train, n_items, params, {"weights": weights})
    model.info["not_converged"] = failed
    return model
