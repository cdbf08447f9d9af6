"""Model roster: default search spaces and fit adapters used by studies and the CLI."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import baselines as bl
from .cfgan import CfganConfig, CfganRecommender
from .cfgan import train as train_cfgan
from .dataset import DatasetSplit
from .experiment import ConfigError
from .metrics import evaluate
from .tuning import Categorical, EarlyStopping, Integer, LogReal, Outcome, Real

TOPK = Integer(5, 1000, log=True)
SHRINK = Integer(0, 1000)

KNN_EXTRA = {
    "cosine": {},
    "dice": {},
    "jaccard": {},
    "asymmetric": {"asymmetric_alpha": Real(0.0, 2.0)},
    "tversky": {"tversky_alpha": Real(0.0, 2.0), "tversky_beta": Real(0.0, 2.0)},
}


def _net_space(prefix):
    return {
        f"{prefix}_hidden_layers": Integer(1, 4),
        f"{prefix}_hidden_features": Integer(50, 300),
        f"{prefix}_steps": Integer(1, 4),
        f"{prefix}_l2": LogReal(1e-4, 1e-1),
        f"{prefix}_lr": LogReal(1e-4, 5e-3),
        f"{prefix}_batch_size": Integer(32, 256),
    }


def cfgan_space(variant):
    space = {}
    if variant in ("ZR", "ZP"):
        space["zr_coefficient"] = Real(0.0, 1.0)
        space["zr_ratio"] = Integer(10, 90)
    if variant in ("PM", "ZP"):
        space["pm_ratio"] = Integer(10, 90)
    space.update(_net_space("g"))
    space.update(_net_space("d"))
    return space


@dataclass
class ModelSpec:
    name: str
    space: dict
    kind: str
    fixed: dict = field(default_factory=dict)


def _roster():
    specs = [
        ModelSpec("toppop", {}, "toppop"),
        ModelSpec("random", {}, "random"),
        ModelSpec("rp3beta", {"topK": TOPK, "alpha": Real(0.0, 2.0), "beta": Real(0.0, 2.0)}, "rp3beta"),
        ModelSpec("puresvd", {"rank": Integer(1, 350)}, "puresvd"),
        ModelSpec("slim", {"topK": TOPK, "l1_ratio": LogReal(1e-5, 1.0), "alpha": LogReal(1e-5, 1.0)}, "slim"),
        ModelSpec("ease_r", {"l2": LogReal(1.0, 1e7)}, "ease_r"),
        ModelSpec("mf_bpr", {"factors": Integer(1, 200), "lr": LogReal(1e-4, 1e-1),
                             "reg": LogReal(1e-5, 1e-1), "epochs": Integer(5, 150)}, "mf_bpr"),
    ]
    for direction in ("item", "user"):
        for sim, extra in KNN_EXTRA.items():
            specs.append(ModelSpec(f"{direction}knn_{sim}", {"topK": TOPK, "shrink": SHRINK, **extra},
                                   "knn", {"direction": direction, "kind": sim}))
    for mode in ("item", "user"):
        for variant in ("ZR", "PM", "ZP"):
            specs.append(ModelSpec(f"cfgan_{mode[0]}{variant}", cfgan_space(variant), "cfgan",
                                   {"mode": mode, "variant": variant}))
    return {s.name: s for s in specs}


MODELS = _roster()
GROUPS = {
    "baselines": [n for n, s in MODELS.items() if s.kind != "cfgan"],
    "cfgan": [n for n, s in MODELS.items() if s.kind == "cfgan"],
    "knn": [n for n, s in MODELS.items() if s.kind == "knn"],
}


def resolve_models(selector):
    """Expand a comma-separated selector of model names and group names."""
    names = []
    for token in selector.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "all":
            found = list(MODELS)
        elif token in GROUPS:
            found = GROUPS[token]
        elif token in MODELS:
            found = [token]
        else:
            raise ConfigError(f"unknown model {token!r}")
        names.extend(n for n in found if n not in names)
    if not names:
        raise ConfigError("empty model selector")
    return names


@dataclass
class CfganOptions:
    """Training knobs that are not tuned: epoch bounds, ablation switches."""

    condition: str = "profile"
    noise_fraction: float = 0.0
    min_epochs: int = 200
    max_epochs: int = 400
    eval_every: int = 5
    patience: int = 5
    early_stopping: bool = True
    dtype: str = "float32"


def cfgan_config(spec, params, options):
    return CfganConfig.from_flat(params, mode=spec.fixed["mode"], variant=spec.fixed["variant"],
                                 condition=options.condition, noise_fraction=options.noise_fraction,
                                 min_epochs=options.min_epochs, max_epochs=options.max_epochs,
                                 dtype=options.dtype)


def fit_model(name, split, params, seed=0, options=None, epochs=None):
    """Fit ``name`` on ``split.train``; returns ``(ranker, epochs_or_None)``.

    CFGAN uses ``split.validation`` for early stopping unless ``epochs``
    fixes the training length.
    """
    spec = MODELS[name]
    train = split.train
    p = dict(params)
    if spec.kind == "toppop":
        return bl.fit_toppop(train), None
    if spec.kind == "random":
        return bl.fit_random(train, seed), None
    if spec.kind == "knn":
        extra = {k: p.pop(k) for k in list(p) if k in ("asymmetric_alpha", "tversky_alpha", "tversky_beta")}
        cfg = bl.SimilarityConfig(kind=spec.fixed["kind"], shrink=p["shrink"], topK=p["topK"], **extra)
        return bl.fit_knn(train, cfg, spec.fixed["direction"]), None
    if spec.kind == "rp3beta":
        return bl.fit_rp3beta(train, **p), None
    if spec.kind == "puresvd":
        return bl.fit_puresvd(train, min(p["rank"], min(train.shape)), seed=seed), None
    if spec.kind == "slim":
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", bl.ConvergenceWarning)
            return bl.fit_slim_elasticnet(train, **p), None
    if spec.kind == "ease_r":
        return bl.fit_ease_r(train, **p), None
    if spec.kind == "mf_bpr":
        return bl.fit_mf_bpr(train, seed=seed, **p), None
    options = options or CfganOptions()
    config = cfgan_config(spec, p, options)
    if epochs is None and options.early_stopping and split.validation is not None:
        stopper = EarlyStopping(options.min_epochs, options.max_epochs, options.eval_every, options.patience)
        gen, history = train_cfgan(config, split, stopper, seed=seed)
    else:
        gen, history = train_cfgan(config, split, None, seed=seed, epochs=epochs or options.max_epochs)
    return CfganRecommender(gen, config, train, seed=seed), history.best_epoch


class Objective:
    """Picklable study objective: fit on train, NDCG@10 on validation."""

    def __init__(self, name, split, options=None, cutoff=10):
        if split.validation is None:
            raise ValueError("tuning needs a validation matrix")
        self.name, self.split, self.options, self.cutoff = name, split, options, cutoff

    def __call__(self, params, seed):
        t0 = time.perf_counter()
        model, epochs = fit_model(self.name, self.split, params, seed, self.options)
        t1 = time.perf_counter()
        report = evaluate(model, self.split.validation, self.split.train, cutoffs=(self.cutoff,), beyond=False)
        return Outcome(report.get("NDCG", self.cutoff), epochs, t1 - t0, time.perf_counter() - t1)


def refit_and_test(name, split, params, seed=0, options=None, epochs=None, cutoffs=(5, 10, 20)):
    """Fit on train plus validation and evaluate on test.

    Returns ``(report, fit_seconds, rank_seconds, n_rows_ranked)``.
    """
    full = DatasetSplit(split.train_full(), split.test)
    t0 = time.perf_counter()
    model, _ = fit_model(name, full, params, seed, options, epochs=epochs)
    t1 = time.perf_counter()
    report = evaluate(model, full.test, full.train, cutoffs=cutoffs, label=name)
    return report, t1 - t0, time.perf_counter() - t1, full.train.num_rows
