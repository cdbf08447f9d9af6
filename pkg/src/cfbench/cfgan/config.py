"""CFGAN hyper-parameters and their admissible ranges."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from ..baselines.base import config_hash

MODES = ("user", "item")
VARIANTS = ("ZR", "PM", "ZP")
CONDITIONS = ("profile", "class")
NOISE_FRACTIONS = (0.0, 0.5, 1.0, 2.0)

# admissible ranges for the tuned hyper-parameters
RANGES = {
    "zr_coefficient": (0.0, 1.0),
    "zr_ratio": (10, 90),
    "pm_ratio": (10, 90),
    "hidden_layers": (1, 4),
    "hidden_features": (50, 300),
    "steps": (1, 4),
    "l2": (1e-4, 1e-1),
    "lr": (1e-4, 5e-3),
    "batch_size": (32, 256),
}


def _check(name, value, key=None):
    lo, hi = RANGES[key or name]
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class NetConfig:
    """Architecture and optimizer settings of one network."""

    hidden_layers: int = 1
    hidden_features: int = 100
    steps: int = 1
    l2: float = 1e-3
    lr: float = 1e-3
    batch_size: int = 64

    def validate(self, who):
        for key in ("hidden_layers", "hidden_features", "steps", "l2", "lr", "batch_size"):
            _check(f"{who}.{key}", getattr(self, key), key)


@dataclass(frozen=True)
class NoiseSpec:
    """Standard-normal noise of ``size`` entries appended before the condition."""

    size: int = 0

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("noise size must be non-negative")

    @classmethod
    def for_width(cls, fraction, width):
        return cls(int(round(fraction * width)))


@dataclass(frozen=True)
class CfganConfig:
    mode: str = "item"
    variant: str = "ZP"
    condition: str = "profile"
    noise_fraction: float = 0.0
    zr_coefficient: float = 0.1
    zr_ratio: int = 70
    pm_ratio: int = 70
    generator: NetConfig = field(default_factory=NetConfig)
    discriminator: NetConfig = field(default_factory=NetConfig)
    min_epochs: int = 200
    max_epochs: int = 400
    dtype: str = "float32"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if float(self.noise_fraction) not in NOISE_FRACTIONS:
            raise ValueError(f"noise_fraction must be one of {NOISE_FRACTIONS}")
        _check("zr_coefficient", self.zr_coefficient)
        _check("zr_ratio", self.zr_ratio)
        _check("pm_ratio", self.pm_ratio)
        self.generator.validate("generator")
        self.discriminator.validate("discriminator")
        if not 1 <= self.min_epochs <= self.max_epochs:
            raise ValueError("need 1 <= min_epochs <= max_epochs")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def uses_zr(self):
        return self.variant in ("ZR", "ZP")

    @property
    def uses_pm(self):
        return self.variant in ("PM", "ZP")

    @property
    def tag(self):
        """Short label such as ``iZP`` or ``uZR``."""
        return self.mode[0] + self.variant

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for net in ("generator", "discriminator"):
            if isinstance(d.get(net), dict):
                d[net] = NetConfig(**d[net])
        return cls(**d)

    @classmethod
    def from_flat(cls, params, **fixed):
        """Build from a flat mapping with ``g_``/``d_`` prefixed network keys."""
        top, nets = dict(fixed), {"g": {}, "d": {}}
        for key, value in params.items():
            if key[:2] in ("g_", "d_"):
                nets[key[0]][key[2:]] = value
            else:
                top[key] = value
        return cls(generator=NetConfig(**nets["g"]), discriminator=NetConfig(**nets["d"]), **top)

    def hash(self):
        return config_hash(self.to_dict())
