"""Shared machinery for fitted scoring models."""

from __future__ import annotations

import hashlib
import json

import numpy as np
import scipy.sparse as sp

DUMP_FORMAT_VERSION = 1


def config_hash(params):
    """Stable short hash of a JSON-serializable parameter mapping."""
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class ScoringModel:
    """A fitted recommender exposing ``score(rows)`` over all items.

    Subclasses store their learned state in ``self.arrays`` (dense arrays or
    sparse CSR matrices) and implement :meth:`_score`. Nothing is excluded
    at fit time; filtering of seen items happens when ranking.
    """

    name = "model"

    def __init__(self, n_items, params=None, arrays=None):
        self.n_items = int(n_items)
        self.params = dict(params or {})
        self.arrays = dict(arrays or {})
        self.info = {}

    def score(self, rows):
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        out = np.asarray(self._score(rows), dtype=np.float64)
        if out.shape != (len(rows), self.n_items):
            raise RuntimeError(f"{self.name}: score block has shape {out.shape}")
        return out

    def _score(self, rows):
        raise NotImplementedError

    def dump(self, path):
        """Write parameters and learned arrays to ``path`` (``.npz``)."""
        payload = {}
        for key, arr in self.arrays.items():
            if sp.issparse(arr):
                arr = arr.tocsr()
                payload[f"csr__{key}__data"] = arr.data
                payload[f"csr__{key}__indices"] = arr.indices
                payload[f"csr__{key}__indptr"] = arr.indptr
                payload[f"csr__{key}__shape"] = np.asarray(arr.shape)
            else:
                payload[f"arr__{key}"] = np.asarray(arr)
        meta = {"format": DUMP_FORMAT_VERSION, "model": self.name, "n_items": self.n_items,
                "params": self.params, "config_hash": config_hash(self.params)}
        payload["meta"] = np.asarray(json.dumps(meta, sort_keys=True, default=str))
        with open(path, "wb") as fh:
            np.savez(fh, **payload)

    @classmethod
    def load(cls, path):
        from . import MODEL_CLASSES

        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta["format"] != DUMP_FORMAT_VERSION:
                raise ValueError(f"unsupported dump format {meta['format']}")
            arrays = {}
            for key in z.files:
                if key.startswith("arr__"):
                    arrays[key[5:]] = z[key]
                elif key.startswith("csr__") and key.endswith("__data"):
                    name = key[5:-6]
                    arrays[name] = sp.csr_matrix(
                        (z[f"csr__{name}__data"], z[f"csr__{name}__indices"], z[f"csr__{name}__indptr"]),
                        shape=tuple(z[f"csr__{name}__shape"]))
        klass = MODEL_CLASSES[meta["model"]]
        obj = klass.__new__(klass)
        ScoringModel.__init__(obj, meta["n_items"], meta["params"], arrays)
        return obj


class ProfileModel(ScoringModel):
    """Models whose scores depend on the user's own training profile."""

    def __init__(self, train, n_items, params=None, arrays=None):
        arrays = dict(arrays or {})
        arrays.setdefault("profiles", train.to_csr())
        super().__init__(n_items, params, arrays)

    @property
    def profiles(self):
        return self.arrays["profiles"]


def top_k_per_row(dense, k, keep_positive=True):
    """Sparsify a dense block keeping the ``k`` largest entries of each row.

    Ties at the boundary are resolved toward the smaller column index.
    """
    n_rows, n_cols = dense.shape
    k = min(k, n_cols)
    if k == n_cols:
        keep = np.broadcast_to(np.arange(n_cols), (n_rows, n_cols))
    else:
        # stable sort on the negated block keeps ties in index order
        keep = np.argsort(-dense, axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(dense, keep, axis=1)
    rows = np.repeat(np.arange(n_rows), keep.shape[1])
    vals = vals.ravel()
    cols = keep.ravel()
    mask = vals > 0 if keep_positive else vals != 0
    return sp.csr_matrix((vals[mask], (rows[mask], cols[mask])), shape=(n_rows, n_cols))
