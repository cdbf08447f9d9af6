"""Experiment configuration files and run records."""

from __future__ import annotations

import json
import os
import statistics
from dataclasses import asdict, dataclass, field, fields

from .baselines.base import config_hash


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


@dataclass
class ExperimentConfig:
    """Every knob of an experiment. Files use one ``key = value`` per line."""

    dataset: str = ""
    layout: str = "tab"
    rating_threshold: float = 1.0
    test_train_ratio: float = 0.8
    validation_train_ratio: float = 0.8
    seed: int = 0
    models: str = "toppop"
    n_trials: int = 50
    n_random: int = 16
    condition: str = "profile"
    noise_fraction: float = 0.0
    early_stopping: bool = True
    min_epochs: int = 200
    max_epochs: int = 400
    eval_every: int = 5
    patience: int = 5
    dtype: str = "float32"
    cutoffs: tuple = (5, 10, 20)
    repeats: int = 5
    params_file: str = ""
    workers: int = 1
    out: str = "runs"

    # not part of the experiment identity
    _VOLATILE = ("workers", "out")

    def __post_init__(self):
        conv = {"rating_threshold": float, "test_train_ratio": float, "validation_train_ratio": float,
                "seed": int, "n_trials": int, "n_random": int, "noise_fraction": float,
                "early_stopping": _bool, "min_epochs": int, "max_epochs": int, "eval_every": int,
                "patience": int, "cutoffs": _ints, "repeats": int, "workers": int}
        for key, fn in conv.items():
            try:
                setattr(self, key, fn(getattr(self, key)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
        if not self.cutoffs or min(self.cutoffs) <= 0:
            raise ConfigError("cutoffs must be positive")
        if not (0 < self.test_train_ratio < 1 and 0 < self.validation_train_ratio < 1):
            raise ConfigError("split ratios must lie in (0, 1)")
        if self.layout not in ("tab", "double-colon", "whitespace"):
            raise ConfigError(f"unknown layout {self.layout!r}")
        if self.workers < 1 or self.repeats < 1 or self.n_trials < 1:
            raise ConfigError("workers, repeats and n_trials must be positive")
        if not 1 <= self.min_epochs <= self.max_epochs:
            raise ConfigError("need 1 <= min_epochs <= max_epochs")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def parse(cls, text, source="<config>"):
        values = {}
        known = set(cls.keys())
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(**values)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.parse(fh.read(), source=path)

    def with_overrides(self, **kw):
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(**d)

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        out = []
        for key, value in self.to_dict().items():
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            out.append(f"{key} = {value}")
        return "\n".join(out) + "\n"

    def hash(self):
        d = {k: v for k, v in self.to_dict().items() if k not in self._VOLATILE}
        return config_hash(d)

    def cfgan_options(self, **changes):
        from .registry import CfganOptions

        opts = CfganOptions(condition=self.condition, noise_fraction=self.noise_fraction,
                            min_epochs=self.min_epochs, max_epochs=self.max_epochs,
                            eval_every=self.eval_every, patience=self.patience,
                            early_stopping=self.early_stopping, dtype=self.dtype)
        for key, value in changes.items():
            setattr(opts, key, value)
        return opts


def mean_std(values):
    values = list(values)
    if not values:
        return 0.0, 0.0
    return statistics.fmean(values), (statistics.pstdev(values) if len(values) > 1 else 0.0)


@dataclass
class RunRecord:
    """Test metrics and timings of one model in one experiment."""

    model: str
    config_hash: str
    seed: int
    kind: str = "tune"
    metrics: dict = field(default_factory=dict)
    train_time_mean: float = 0.0
    train_time_std: float = 0.0
    rec_time: float = 0.0
    throughput: float = 0.0
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("train_time_mean", "train_time_std", "rec_time", "throughput"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be non-negative")

    def save(self, path):
        write_json(path, asdict(self))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    os.replace(tmp, path)


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
