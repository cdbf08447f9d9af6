"""Tree-structured Parzen estimator for sequential hyper-parameter search.

After ``n_startup`` prior draws, the trials are split into the best
``gamma`` fraction and the rest. Each parameter gets one kernel density per
group (independently across parameters); candidates are drawn from the
"good" density and the one maximizing ``l(x) / g(x)`` is proposed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp, ndtr

from .space import Categorical, sample_uniform

N_STARTUP = 16
GAMMA = 0.25
N_CANDIDATES = 24


class _Parzen1D:
    """Truncated-Gaussian mixture on ``[lo, hi]`` plus one uniform prior component."""

    def __init__(self, obs, lo, hi):
        self.lo, self.hi = lo, hi
        width = hi - lo
        self.mu = np.asarray(obs, dtype=np.float64)
        n = len(self.mu)
        if n > 1:
            sigma = 1.06 * np.std(self.mu) * n ** -0.2
        else:
            sigma = width
        self.sigma = float(np.clip(sigma, 0.05 * width, width))
        self.weights = np.full(n + 1, 1.0 / (n + 1))
        # mass of each truncated component inside the bounds
        a = (lo - self.mu) / self.sigma
        b = (hi - self.mu) / self.sigma
        self.mass = np.maximum(ndtr(b) - ndtr(a), 1e-300)

    def sample(self, rng, size):
        out = np.empty(size)
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        for i, c in enumerate(comp):
            if c == len(self.mu):
                out[i] = rng.uniform(self.lo, self.hi)
                continue
            while True:
                x = rng.normal(self.mu[c], self.sigma)
                if self.lo <= x <= self.hi:
                    out[i] = x
                    break
        return out

    def log_pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        z = (x[:, None] - self.mu[None, :]) / self.sigma
        log_gauss = (-0.5 * z * z - math.log(self.sigma * math.sqrt(2 * math.pi))
                     - np.log(self.mass)[None, :] + np.log(self.weights[:-1])[None, :])
        log_prior = np.full((len(x), 1), math.log(self.weights[-1]) - math.log(self.hi - self.lo))
        return logsumexp(np.hstack([log_gauss, log_prior]), axis=1)


class _Categorical1D:
    def __init__(self, obs_idx, k):
        counts = np.bincount(np.asarray(obs_idx, dtype=np.int64), minlength=k).astype(np.float64)
        self.p = (counts + 1.0) / (counts.sum() + k)

    def sample(self, rng, size):
        return rng.choice(len(self.p), size=size, p=self.p)

    def log_pdf(self, idx):
        return np.log(self.p[np.asarray(idx, dtype=np.int64)])


def _split(history, gamma):
    """Order trials best first (failed ones last) and cut after the good fraction."""
    scored = [(t.value if t.ok else -math.inf, -i, t) for i, t in enumerate(history)]
    scored.sort(key=lambda s: (s[0], s[1]), reverse=True)
    ordered = [s[2] for s in scored]
    n_good = max(1, int(math.ceil(gamma * len(ordered))))
    return ordered[:n_good], ordered[n_good:]


def suggest(space, history, rng, n_startup=N_STARTUP, gamma=GAMMA, n_candidates=N_CANDIDATES):
    """Next assignment for ``space`` given the finished ``history`` of trials.

    Trials need ``params``, ``value`` and ``ok`` attributes.
    """
    if len(history) < n_startup or not any(t.ok for t in history) or len(history) < 2:
        return {name: sample_uniform(spec, rng) for name, spec in space.items()}
    good, bad = _split(history, gamma)
    if not bad:
        bad = good
    scores = np.zeros(n_candidates)
    columns = {}
    for name, spec in space.items():
        if isinstance(spec, Categorical):
            k = len(spec.values)
            l_est = _Categorical1D([spec.index(t.params[name]) for t in good], k)
            g_est = _Categorical1D([spec.index(t.params[name]) for t in bad], k)
            cand = l_est.sample(rng, n_candidates)
            columns[name] = [spec.values[int(c)] for c in cand]
        else:
            lo, hi = spec.bounds()
            l_est = _Parzen1D([spec.encode(t.params[name]) for t in good], lo, hi)
            g_est = _Parzen1D([spec.encode(t.params[name]) for t in bad], lo, hi)
            cand = l_est.sample(rng, n_candidates)
            columns[name] = [spec.decode(c) for c in cand]
        scores += l_est.log_pdf(cand) - g_est.log_pdf(cand)
    best = int(np.argmax(scores))
    return {name: columns[name][best] for name in space}
