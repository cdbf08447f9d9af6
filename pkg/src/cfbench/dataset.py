"""Implicit-feedback interaction matrices, MovieLens loaders and holdout splits."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

LAYOUTS = ("tab", "double-colon", "whitespace")


class ParseError(ValueError):
    """Raised for malformed rating files; carries the 1-based line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class InteractionMatrix:
    """Binary user x item matrix stored row-compressed.

    Every stored value is 1.0 and column indices are strictly increasing
    within each row. Instances are treated as immutable.
    """

    __slots__ = ("_csr", "row_ids", "col_ids")

    def __init__(self, csr, row_ids=None, col_ids=None):
        csr = sp.csr_matrix(csr, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        csr.data[:] = 1.0
        csr.indptr = csr.indptr.astype(np.int64)
        csr.indices = csr.indices.astype(np.int64)
        csr.data.flags.writeable = False
        self._csr = csr
        self.row_ids = None if row_ids is None else np.asarray(row_ids)
        self.col_ids = None if col_ids is None else np.asarray(col_ids)

    @classmethod
    def from_pairs(cls, rows, cols, shape, row_ids=None, col_ids=None):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        data = np.ones(len(rows), dtype=np.float64)
        return cls(sp.csr_matrix((data, (rows, cols)), shape=shape), row_ids, col_ids)

    @property
    def shape(self):
        return self._csr.shape

    @property
    def num_rows(self):
        return self._csr.shape[0]

    @property
    def num_cols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def indptr(self):
        return self._csr.indptr

    @property
    def indices(self):
        return self._csr.indices

    def to_csr(self):
        """Return a private writable copy as ``scipy.sparse.csr_matrix``."""
        return self._csr.copy()

    @property
    def csr(self):
        return self._csr

    def row(self, r):
        return self._csr.indices[self._csr.indptr[r]:self._csr.indptr[r + 1]]

    def dense_rows(self, rows, dtype=np.float64):
        return self._csr[rows].toarray().astype(dtype, copy=False)

    def row_lengths(self):
        return np.diff(self._csr.indptr)

    def col_counts(self):
        return np.bincount(self._csr.indices, minlength=self.num_cols).astype(np.float64)

    def pairs(self):
        rows = np.repeat(np.arange(self.num_rows, dtype=np.int64), self.row_lengths())
        return rows, self._csr.indices.copy()

    def transpose(self):
        return InteractionMatrix(self._csr.T.tocsr(), self.col_ids, self.row_ids)

    T = property(transpose)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return InteractionMatrix(self._csr + other._csr, self.row_ids, self.col_ids)

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix) or self.shape != other.shape:
            return False
        return (np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    __hash__ = None

    def __repr__(self):
        return f"InteractionMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz})"


@dataclass(frozen=True)
class DatasetSplit:
    train: InteractionMatrix
    test: InteractionMatrix
    validation: InteractionMatrix | None = None

    def __post_init__(self):
        shapes = {m.shape for m in (self.train, self.test, self.validation) if m is not None}
        if len(shapes) != 1:
            raise ValueError(f"split members disagree on shape: {sorted(shapes)}")

    @property
    def shape(self):
        return self.train.shape

    def train_full(self):
        """Train and validation merged, used for final refits."""
        if self.validation is None:
            return self.train
        return self.train + self.validation

    def transpose(self):
        return DatasetSplit(
            self.train.transpose(),
            self.test.transpose(),
            None if self.validation is None else self.validation.transpose(),
        )


def _split_line(line, layout):
    if layout == "tab":
        return line.split("\t")
    if layout == "double-colon":
        return line.split("::")
    if layout == "whitespace":
        return line.split()
    raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def load_interactions(path, layout="tab", rating_threshold=1.0):
    """Read a MovieLens-style ratings file into an :class:`InteractionMatrix`.

    Each line is ``user sep item sep rating [sep timestamp]``. Records with
    ``rating >= rating_threshold`` become interactions. Raw identifiers are
    densely re-indexed in first-appearance order over *all* records, so the
    index space does not depend on the threshold; ``row_ids``/``col_ids`` on
    the result map dense indices back to raw identifiers.
    """
    path = Path(path)
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    user_index, item_index = {}, {}
    rows, cols = [], []
    seen_any = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            seen_any = True
            parts = _split_line(line, layout)
            if len(parts) not in (3, 4):
                raise ParseError(path, lineno, f"expected 3 or 4 fields, got {len(parts)}")
            user, item, rating = parts[0].strip(), parts[1].strip(), parts[2]
            if not user or not item:
                raise ParseError(path, lineno, "empty identifier")
            try:
                value = float(rating)
            except ValueError:
                raise ParseError(path, lineno, f"rating {rating!r} is not a number") from None
            u = user_index.setdefault(user, len(user_index))
            i = item_index.setdefault(item, len(item_index))
            if value >= rating_threshold:
                rows.append(u)
                cols.append(i)
    if not seen_any:
        raise ValueError(f"{path}: file contains no records")
    return InteractionMatrix.from_pairs(
        rows, cols, (len(user_index), len(item_index)),
        row_ids=np.array(list(user_index), dtype=object),
        col_ids=np.array(list(item_index), dtype=object),
    )


def split_holdout(m, train_ratio, seed):
    """Randomly hold out interactions with an exact train count.

    The stored entries are shuffled with a seeded generator and the first
    ``round(train_ratio * nnz)`` go to train. Dimensions are preserved.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    if m.nnz == 0:
        raise ValueError("cannot split an empty matrix")
    rows, cols = m.pairs()
    rng = np.random.default_rng(seed)
    order = rng.permutation(m.nnz)
    n_train = int(round(train_ratio * m.nnz))
    tr, ho = order[:n_train], order[n_train:]
    train = InteractionMatrix.from_pairs(rows[tr], cols[tr], m.shape, m.row_ids, m.col_ids)
    holdout = InteractionMatrix.from_pairs(rows[ho], cols[ho], m.shape, m.row_ids, m.col_ids)
    return train, holdout


def transpose(m):
    return m.transpose()


def make_split(m, test_train_ratio=0.8, validation_train_ratio=0.8, seed=0):
    """Two-level holdout: test out of the full data, then validation out of train."""
    train_full, test = split_holdout(m, test_train_ratio, seed)
    if validation_train_ratio is None:
        return DatasetSplit(train_full, test)
    train, validation = split_holdout(train_full, validation_train_ratio, seed + 1)
    return DatasetSplit(train, test, validation)


def write_id_map(path, ids, header=None):
    """Two-column ``dense_index<TAB>raw_id`` text file."""
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    for k, raw in enumerate(ids):
        buf.write(f"{k}\t{raw}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_id_map(path):
    ids = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        k, raw = line.split("\t", 1)
        if int(k) != len(ids):
            raise ValueError(f"{path}: id map is not dense at index {k}")
        ids.append(raw)
    return np.array(ids, dtype=object)


def save_matrix(path, m, **meta):
    """Store a matrix as ``.npz``; extra keyword values are embedded as metadata."""
    extra = {f"meta_{k}": np.asarray(str(v)) for k, v in sorted(meta.items())}
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh, indptr=m.indptr, indices=m.indices,
            shape=np.asarray(m.shape, dtype=np.int64), **extra,
        )


def load_matrix(path):
    with np.load(path, allow_pickle=False) as z:
        shape = tuple(int(x) for x in z["shape"])
        data = np.ones(len(z["indices"]), dtype=np.float64)
        csr = sp.csr_matrix((data, z["indices"], z["indptr"]), shape=shape)
        meta = {k[5:]: str(z[k]) for k in z.files if k.startswith("meta_")}
    m = InteractionMatrix(csr)
    return m, meta
