"""Top-N accuracy and beyond-accuracy metrics.

Formulas used in reports (``n`` is the cutoff, ranks start at 1):

* PREC = hits / n, REC = hits / |relevant|
* F1 = harmonic mean of the averaged PREC and REC
* MRR = 1 / rank of the first hit, ARHR = sum of 1 / rank over hits
* MAP = sum of precision@rank over hits / min(|relevant|, n)
* NDCG = DCG / IDCG, gain 1, discount 1 / log2(rank + 1)
* Novelty = mean over lists of sum_j -log2(pop_j / total_pop) / #items
* CovItem = distinct recommended items / #items
* DivGini = 1 - Gini index of per-item recommendation counts
* DivShannon = entropy in bits of per-item recommendation frequencies
* DivMIL = mean over ordered list pairs of 1 - cosine(list indicators)
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

ACCURACY_METRICS = ("PREC", "REC", "F1", "MAP", "MRR", "ARHR", "NDCG")
BEYOND_METRICS = ("Novelty", "CovItem", "DivMIL", "DivGini", "DivShannon")
ALL_METRICS = ACCURACY_METRICS + BEYOND_METRICS


@dataclass
class RankedList:
    row: int
    items: np.ndarray
    scores: np.ndarray


def rank_scores(scores, exclude=(), n=None):
    """Indices of the top ``n`` scores, ties broken by ascending index."""
    scores = np.asarray(scores, dtype=np.float64).copy()
    if len(exclude):
        scores[np.asarray(exclude, dtype=np.int64)] = -np.inf
    eligible = np.count_nonzero(scores > -np.inf)
    order = np.argsort(-scores, kind="stable")
    n = eligible if n is None else min(n, eligible)
    return order[:n]


def top_n(score_block, exclude_csr, rows, n):
    """Batched ranking: one row of ``score_block`` per entry of ``rows``.

    Seen items (from ``exclude_csr``) are removed before ranking. Returns an
    (len(rows), n) index array padded with -1 where fewer items are eligible.
    """
    block = np.array(score_block, dtype=np.float64, copy=True)
    if exclude_csr is not None:
        sub = exclude_csr[rows]
        r = np.repeat(np.arange(len(rows)), np.diff(sub.indptr))
        block[r, sub.indices] = -np.inf
    block[np.isnan(block)] = -np.inf
    n = min(n, block.shape[1])
    order = np.argsort(-block, axis=1, kind="stable")[:, :n]
    dead = np.take_along_axis(block, order, axis=1) == -np.inf
    order[dead] = -1
    return order


def accuracy_at(items, relevant, n):
    """Per-list accuracy metrics for a ranked list truncated at ``n``."""
    if n <= 0:
        raise ValueError(f"cutoff must be positive, got {n}")
    relevant = set(int(x) for x in relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    items = [int(x) for x in items[:n] if x >= 0]
    hits = np.array([it in relevant for it in items], dtype=bool)
    ranks = np.flatnonzero(hits) + 1
    n_hits = len(ranks)
    prec = n_hits / n
    rec = n_hits / len(relevant)
    f1 = 0.0 if n_hits == 0 else 2 * prec * rec / (prec + rec)
    mrr = 1.0 / ranks[0] if n_hits else 0.0
    arhr = float(np.sum(1.0 / ranks))
    ap = float(np.sum(np.arange(1, n_hits + 1) / ranks)) / min(len(relevant), n)
    dcg = float(np.sum(1.0 / np.log2(ranks + 1)))
    idcg = float(np.sum(1.0 / np.log2(np.arange(1, min(len(relevant), n) + 1) + 1)))
    return {"PREC": prec, "REC": rec, "F1": f1, "MAP": ap, "MRR": mrr,
            "ARHR": arhr, "NDCG": dcg / idcg}


def _batch_accuracy(top, relevant_csr, rows, n):
    """Vectorized per-row metrics for a block of ranked lists."""
    top = top[:, :n]
    sub = relevant_csr[rows]
    n_rel = np.diff(sub.indptr)
    valid = top >= 0
    safe = np.where(valid, top, 0)
    # membership test via sorted CSR indices, row by row offsets
    hits = np.zeros(top.shape, dtype=bool)
    for k in range(len(rows)):
        rel = sub.indices[sub.indptr[k]:sub.indptr[k + 1]]
        if len(rel):
            pos = np.searchsorted(rel, safe[k])
            pos[pos >= len(rel)] = 0
            hits[k] = (rel[pos] == safe[k]) & valid[k]
    ranks = np.arange(1, top.shape[1] + 1, dtype=np.float64)
    n_hits = hits.sum(axis=1)
    prec = n_hits / n
    rec = np.divide(n_hits, n_rel, out=np.zeros(len(rows)), where=n_rel > 0)
    first = np.where(hits.any(axis=1), np.argmax(hits, axis=1) + 1, 0)
    mrr = np.divide(1.0, first, out=np.zeros(len(rows)), where=first > 0)
    arhr = (hits / ranks).sum(axis=1)
    cum_hits = np.cumsum(hits, axis=1)
    ap_num = (hits * cum_hits / ranks).sum(axis=1)
    denom = np.minimum(n_rel, n)
    ap = np.divide(ap_num, denom, out=np.zeros(len(rows)), where=denom > 0)
    disc = 1.0 / np.log2(ranks + 1)
    dcg = (hits * disc).sum(axis=1)
    idcg_table = np.concatenate([[0.0], np.cumsum(1.0 / np.log2(np.arange(1, n + 1) + 1))])
    idcg = idcg_table[denom]
    ndcg = np.divide(dcg, idcg, out=np.zeros(len(rows)), where=idcg > 0)
    return {"PREC": prec, "REC": rec, "MAP": ap, "MRR": mrr, "ARHR": arhr, "NDCG": ndcg}


def beyond_accuracy(lists, train, n):
    """Corpus-level novelty, coverage and diversity of a set of top-n lists.

    ``lists`` is an iterable of item index sequences (or :class:`RankedList`);
    ``train`` supplies item popularity and the item count.
    """
    n_items = train.num_cols
    pop = train.col_counts()
    total_pop = pop.sum()
    counts = np.zeros(n_items, dtype=np.float64)
    novelty = 0.0
    n_lists = 0
    # sum of L2-normalized list indicator vectors, for the exact MIL identity
    norm_sum = np.zeros(n_items, dtype=np.float64)
    n_nonempty = 0
    for lst in lists:
        items = lst.items if isinstance(lst, RankedList) else lst
        items = np.asarray(items, dtype=np.int64)[:n]
        items = items[items >= 0]
        n_lists += 1
        if len(items) == 0:
            continue
        n_nonempty += 1
        counts[items] += 1
        norm_sum[items] += 1.0 / math.sqrt(len(items))
        if total_pop > 0:
            p = pop[items] / total_pop
            p = p[p > 0]
            novelty += float(np.sum(-np.log2(p))) / n_items
    if n_lists == 0:
        raise ValueError("no recommendation lists given")
    return {
        "Novelty": novelty / n_lists,
        "CovItem": np.count_nonzero(counts) / n_items,
        "DivMIL": _mean_inter_list(norm_sum, n_nonempty),
        "DivGini": _gini_diversity(counts),
        "DivShannon": _shannon(counts),
    }


def _mean_inter_list(norm_sum, n_lists):
    # sum over ordered pairs u != v of cos(u, v) = ||sum_u l_u||^2 - n_lists
    if n_lists < 2:
        return 0.0
    pair_cos = float(norm_sum @ norm_sum) - n_lists
    return 1.0 - pair_cos / (n_lists * (n_lists - 1))


def _gini_diversity(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    x = np.sort(counts)
    k = len(x)
    idx = np.arange(1, k + 1)
    gini = float(np.sum((2 * idx - k - 1) * x)) / (k * total)
    return float(1.0 - gini)


def _shannon(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


@dataclass
class MetricReport:
    """Metrics per cutoff plus the number of rows entering accuracy averages."""

    values: dict = field(default_factory=dict)
    n_evaluated: int = 0
    label: str = ""

    def __getitem__(self, cutoff):
        return self.values[cutoff]

    def get(self, metric, cutoff):
        return self.values[cutoff][metric]

    @property
    def cutoffs(self):
        return sorted(self.values)

    def to_rows(self, **extra):
        rows = []
        for c in self.cutoffs:
            row = {"model": self.label, "cutoff": c}
            row.update(extra)
            row.update({m: self.values[c][m] for m in ALL_METRICS})
            rows.append(row)
        return rows

    def to_csv(self, **extra):
        rows = self.to_rows(**extra)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self):
        return {"label": self.label, "n_evaluated": self.n_evaluated,
                "metrics": {str(c): self.values[c] for c in self.cutoffs}}

    def to_json(self, **extra):
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls({int(c): dict(v) for c, v in d["metrics"].items()},
                   d.get("n_evaluated", 0), d.get("label", ""))


def evaluate(ranker, relevant, exclude, cutoffs=(5, 10, 20), batch_size=512,
             beyond=True, label="", return_lists=False):
    """Evaluate a ranker on held-out interactions.

    ``ranker.score(rows)`` must return a dense (len(rows), n_items) block.
    Items stored in ``exclude`` (normally the matrix the model was fit on)
    are never recommended. Rows without held-out items are skipped in the
    accuracy averages but their lists count for beyond-accuracy metrics.
    """
    cutoffs = sorted(set(int(c) for c in cutoffs))
    if not cutoffs or cutoffs[0] <= 0:
        raise ValueError(f"cutoffs must be positive, got {cutoffs}")
    n_rows = relevant.num_rows
    max_n = cutoffs[-1]
    rel_csr = relevant.csr
    exc_csr = None if exclude is None else exclude.csr
    has_rel = np.diff(rel_csr.indptr) > 0
    if not has_rel.any():
        raise ValueError("no row has held-out interactions; nothing to evaluate")
    rows_to_rank = np.arange(n_rows) if beyond else np.flatnonzero(has_rel)

    per_row = {c: {m: np.zeros(n_rows) for m in ("PREC", "REC", "MAP", "MRR", "ARHR", "NDCG")}
               for c in cutoffs}
    all_top = np.full((len(rows_to_rank), max_n), -1, dtype=np.int64)
    for start in range(0, len(rows_to_rank), batch_size):
        rows = rows_to_rank[start:start + batch_size]
        block = ranker.score(rows)
        top = top_n(block, exc_csr, rows, max_n)
        all_top[start:start + len(rows), :top.shape[1]] = top
        mask = has_rel[rows]
        if not mask.any():
            continue
        for c in cutoffs:
            per = _batch_accuracy(top[mask], rel_csr, rows[mask], c)
            for m, v in per.items():
                per_row[c][m][rows[mask]] = v

    n_eval = int(has_rel.sum())
    report = MetricReport(label=label, n_evaluated=n_eval)
    for c in cutoffs:
        # exact summation in row order keeps reports bit-stable across batch sizes
        vals = {m: math.fsum(v[has_rel]) / n_eval for m, v in per_row[c].items()}
        p, r = vals["PREC"], vals["REC"]
        vals["F1"] = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        if beyond:
            vals.update(beyond_accuracy(all_top[:, :c], exclude if exclude is not None else relevant, c))
        else:
            vals.update({m: float("nan") for m in BEYOND_METRICS})
        report.values[c] = vals
    if return_lists:
        return report, rows_to_rank, all_top
    return report
