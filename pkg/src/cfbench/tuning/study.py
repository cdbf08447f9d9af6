"""Sequential studies: suggest, evaluate, journal, select, refit."""

from __future__ import annotations

import json
import math
import os
import time
import traceback
from dataclasses import asdict, dataclass, field

import numpy as np

from .space import validate_assignment
from .tpe import GAMMA, N_CANDIDATES, suggest


@dataclass
class Trial:
    number: int
    params: dict
    value: float = -math.inf
    status: str = "ok"
    seed: int = 0
    epochs: int | None = None
    fit_seconds: float = 0.0
    eval_seconds: float = 0.0
    error: str | None = None

    @property
    def ok(self):
        return self.status == "ok" and math.isfinite(self.value)

    def to_dict(self):
        d = asdict(self)
        if not math.isfinite(d["value"]):
            d["value"] = None
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if d.get("value") is None:
            d["value"] = -math.inf
        return cls(**d)


@dataclass
class Outcome:
    """What an objective returns: the validation value plus optional details."""

    value: float
    epochs: int | None = None
    fit_seconds: float = 0.0
    eval_seconds: float = 0.0


@dataclass
class StudyResult:
    trials: list
    best: Trial
    final: object = None
    meta: dict = field(default_factory=dict)

    @property
    def best_params(self):
        return dict(self.best.params)

    def values(self):
        return [t.value for t in self.trials]


class Journal:
    """Append-only JSON-lines trial log, one record per finished trial."""

    def __init__(self, path, header=None):
        self.path = path
        self.header = dict(header or {})

    def read(self):
        if self.path is None or not os.path.exists(self.path):
            return []
        trials = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if "trial" in rec:
                    trials.append(Trial.from_dict(rec["trial"]))
        return trials

    def append(self, trial):
        if self.path is None:
            return
        rec = dict(self.header)
        rec["trial"] = trial.to_dict()
        with open(self.path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def _run_trial(objective, params, number, trial_seed):
    trial = Trial(number, params, seed=trial_seed)
    start = time.perf_counter()
    try:
        out = objective(params, trial_seed)
    except Exception as exc:  # a failed trial is recorded, not retried
        trial.status = "failed"
        trial.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        trial.fit_seconds = time.perf_counter() - start
        return trial
    if not isinstance(out, Outcome):
        out = Outcome(float(out))
    trial.value = float(out.value)
    trial.epochs = out.epochs
    trial.fit_seconds = out.fit_seconds or (time.perf_counter() - start)
    trial.eval_seconds = out.eval_seconds
    if not math.isfinite(trial.value):
        trial.status = "failed"
        trial.error = f"non-finite objective {trial.value}"
        trial.value = -math.inf
    return trial


def best_trial(trials):
    """Highest objective among ok trials; the earlier trial wins ties."""
    ok = [t for t in trials if t.ok]
    if not ok:
        raise RuntimeError("every trial failed")
    best = ok[0]
    for t in ok[1:]:
        if t.value > best.value:
            best = t
    return best


def run_study(objective, space, n_total=50, n_random=16, seed=0, journal=None, refit=None,
              gamma=GAMMA, n_candidates=N_CANDIDATES, workers=1, log=None):
    """Run ``n_total`` trials of ``objective(params, trial_seed)`` and refit the best.

    Trial ``t`` draws its suggestion from ``default_rng([seed, t])`` and
    trains with seed ``seed * 1000 + t``, so a study resumed from its
    journal continues exactly as an uninterrupted one would. An empty space
    runs a single trial. ``refit(best_trial)`` is called once at the end and
    its return value is stored in ``result.final``.
    """
    if not space:
        n_total = 1
    if isinstance(journal, (str, os.PathLike)):
        journal = Journal(journal)
    trials = journal.read() if journal is not None else []
    if len(trials) > n_total:
        trials = trials[:n_total]
    pool = None
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        pool = ProcessPoolExecutor(max_workers=workers)
    try:
        while len(trials) < n_total:
            start = len(trials)
            # a parallel wave shares the history known at its start
            wave = range(start, min(start + max(1, workers), n_total))
            jobs = []
            for t in wave:
                rng = np.random.default_rng([seed, t])
                params = suggest(space, trials, rng, n_startup=n_random, gamma=gamma,
                                 n_candidates=n_candidates)
                validate_assignment(space, params)
                jobs.append((params, t, seed * 1000 + t))
            if pool is None:
                done = [_run_trial(objective, *job) for job in jobs]
            else:
                done = list(pool.map(_run_trial, [objective] * len(jobs), *zip(*jobs)))
            for trial in done:
                trials.append(trial)
                if journal is not None:
                    journal.append(trial)
                if log is not None:
                    log(trial)
    finally:
        if pool is not None:
            pool.shutdown()
    best = best_trial(trials)
    result = StudyResult(trials, best, meta={"seed": seed, "n_total": n_total, "n_random": n_random,
                                             "gamma": gamma, "n_candidates": n_candidates})
    if refit is not None:
        result.final = refit(best)
    return result
