"""Ranking with a trained generator and checkpoint persistence."""

from __future__ import annotations

import json

import numpy as np

from ..metrics import RankedList, rank_scores
from .config import CfganConfig, NoiseSpec
from .core import build_condition_batch, generator_forward, sample_noise
from .nets import Mlp

CHECKPOINT_FORMAT = 1


class CfganRecommender:
    """Exposes ``score(user_rows)`` over all items for a trained generator.

    ``train_matrix`` is the users x items matrix the conditions are built
    from. In item mode the generator emits one column of the score matrix
    per item, so the whole matrix is generated once and cached.
    """

    name = "cfgan"

    def __init__(self, generator, config, train_matrix, seed=0, batch_size=1024):
        self.generator = generator
        self.config = config
        self.train = train_matrix
        self.n_items = train_matrix.num_cols
        self.rng = np.random.default_rng(seed)
        self.batch_size = batch_size
        oriented = train_matrix if config.mode == "user" else train_matrix.transpose()
        self._oriented = oriented.csr
        self._n_rows, self._n_cols = oriented.shape
        self.noise = NoiseSpec.for_width(config.noise_fraction, self._n_cols)
        expected = self.noise.size + (self._n_cols if config.condition == "profile" else self._n_rows)
        if generator.input_width != expected:
            raise ValueError(f"generator input width {generator.input_width} does not match data ({expected})")
        self._cache = None

    def generate(self, rows):
        """Generator output for rows of the oriented matrix."""
        dtype = self.generator.dtype
        real = self._oriented[rows].toarray().astype(dtype)
        cond = build_condition_batch(self.config.condition, rows, real, self._n_rows, dtype)
        z = sample_noise(self.noise, self.rng, len(rows), dtype)
        return generator_forward(self.generator, z, cond)

    def _full_item_scores(self):
        if self._cache is None:
            blocks = [self.generate(np.arange(s, min(s + self.batch_size, self._n_rows)))
                      for s in range(0, self._n_rows, self.batch_size)]
            self._cache = np.ascontiguousarray(np.vstack(blocks).T, dtype=np.float64)
        return self._cache

    def score(self, rows):
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        if self.config.mode == "item":
            return self._full_item_scores()[rows]
        return self.generate(rows).astype(np.float64)


def recommend(generator, config, row, real_row, n, rng=None, n_rows=None):
    """Top-``n`` unseen entries for one row of the generator's own orientation.

    ``real_row`` is the row's training profile: it is the condition (for
    profile conditioning) and its nonzero entries are excluded.
    """
    real_row = np.asarray(real_row)
    dtype = generator.dtype
    noise = NoiseSpec.for_width(config.noise_fraction, len(real_row))
    rng = rng if rng is not None else np.random.default_rng()
    if config.condition == "class" and n_rows is None:
        n_rows = generator.input_width - noise.size
    cond = build_condition_batch(config.condition, np.array([row]), real_row[None, :].astype(dtype),
                                 n_rows, dtype)
    z = sample_noise(noise, rng, 1, dtype)
    scores = generator_forward(generator, z, cond)[0].astype(np.float64)
    items = rank_scores(scores, np.flatnonzero(real_row), n)
    return RankedList(int(row), items, scores[items])


def save_checkpoint(path, generator, config, seed=0, **extra):
    """Write generator parameters, config and metadata to an ``.npz`` file."""
    meta = {"format": CHECKPOINT_FORMAT, "config": config.to_dict(), "config_hash": config.hash(),
            "seed": seed, "sizes": generator.sizes, "extra": extra}
    payload = {"meta": np.asarray(json.dumps(meta, sort_keys=True, default=str))}
    for i, (w, b) in enumerate(generator.layers):
        payload[f"W{i}"] = w
        payload[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Return ``(generator, config, meta)`` saved by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta["format"] != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {meta['format']}")
        n_layers = len(meta["sizes"]) - 1
        layers = [(z[f"W{i}"], z[f"b{i}"]) for i in range(n_layers)]
    config = CfganConfig.from_dict(meta["config"])
    if config.hash() != meta["config_hash"]:
        raise ValueError("checkpoint config hash mismatch")
    return Mlp(layers, name="generator"), config, meta
