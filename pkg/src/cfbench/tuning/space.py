"""Declarative hyper-parameter search spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Integer:
    """Integers in ``[lo, hi]``, uniform or log-uniform."""

    lo: int
    hi: int
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.log and self.lo < 1:
            raise ValueError("log-uniform integers need lo >= 1")

    # internal coordinates in which the prior is uniform
    def bounds(self):
        if self.log:
            return math.log(self.lo - 0.5), math.log(self.hi + 0.5)
        return self.lo - 0.5, self.hi + 0.5

    def decode(self, u):
        x = math.exp(u) if self.log else u
        return int(min(max(round(x), self.lo), self.hi))

    def encode(self, value):
        return math.log(value) if self.log else float(value)

    def contains(self, value):
        return isinstance(value, (int, np.integer)) and self.lo <= value <= self.hi

    def to_dict(self):
        return {"type": "integer", "lo": self.lo, "hi": self.hi, "log": self.log}


@dataclass(frozen=True)
class Real:
    """Reals in ``[lo, hi]``, uniform."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def bounds(self):
        return float(self.lo), float(self.hi)

    def decode(self, u):
        return float(min(max(u, self.lo), self.hi))

    def encode(self, value):
        return float(value)

    def contains(self, value):
        return self.lo <= value <= self.hi

    def to_dict(self):
        return {"type": "real", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LogReal(Real):
    """Reals in ``[lo, hi]`` with a uniformly distributed logarithm."""

    def __post_init__(self):
        super().__post_init__()
        if self.lo <= 0:
            raise ValueError("log-uniform reals need lo > 0")

    def bounds(self):
        return math.log(self.lo), math.log(self.hi)

    def decode(self, u):
        return float(min(max(math.exp(u), self.lo), self.hi))

    def encode(self, value):
        return math.log(value)

    def to_dict(self):
        return {"type": "logreal", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("categorical space needs at least one value")
        object.__setattr__(self, "values", tuple(self.values))

    def contains(self, value):
        return value in self.values

    def index(self, value):
        return self.values.index(value)

    def to_dict(self):
        return {"type": "categorical", "values": list(self.values)}


def spec_from_dict(d):
    kind = d["type"]
    if kind == "integer":
        return Integer(int(d["lo"]), int(d["hi"]), bool(d.get("log", False)))
    if kind == "real":
        return Real(float(d["lo"]), float(d["hi"]))
    if kind == "logreal":
        return LogReal(float(d["lo"]), float(d["hi"]))
    if kind == "categorical":
        return Categorical(tuple(d["values"]))
    raise ValueError(f"unknown parameter type {kind!r}")


def sample_uniform(spec, rng):
    """One draw from the prior of ``spec``."""
    if isinstance(spec, Categorical):
        return spec.values[int(rng.integers(len(spec.values)))]
    lo, hi = spec.bounds()
    return spec.decode(rng.uniform(lo, hi))


def validate_assignment(space, params):
    missing = set(space) - set(params)
    extra = set(params) - set(space)
    if missing or extra:
        raise ValueError(f"assignment keys differ from space: missing {sorted(missing)}, extra {sorted(extra)}")
    for name, spec in space.items():
        if not spec.contains(params[name]):
            raise ValueError(f"{name}={params[name]!r} outside its space {spec.to_dict()}")
