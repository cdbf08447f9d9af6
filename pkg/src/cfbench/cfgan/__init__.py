"""Conditional GAN recommender trained on implicit-feedback profiles."""

from .config import CONDITIONS, MODES, NOISE_FRACTIONS, RANGES, VARIANTS, CfganConfig, NetConfig, NoiseSpec
from .core import (apply_mask, build_condition, discriminator_forward, discriminator_loss,
                   generator_forward, generator_loss, sample_noise, sample_zero_indices,
                   sample_zero_mask)
from .model import CfganRecommender, load_checkpoint, recommend, save_checkpoint
from .nets import AdamState, Mlp, NonFiniteGradientError, backprop_and_step, sigmoid
from .training import (DivergenceError, Trainer, TrainingHistory, discriminator_objective,
                       generator_objective, train)

__all__ = [
    "CfganConfig", "NetConfig", "NoiseSpec", "Mlp", "AdamState", "CfganRecommender",
    "Trainer", "TrainingHistory", "DivergenceError", "NonFiniteGradientError",
    "sample_noise", "build_condition", "generator_forward", "discriminator_forward",
    "sample_zero_indices", "sample_zero_mask", "apply_mask", "discriminator_loss",
    "generator_loss", "backprop_and_step", "discriminator_objective", "generator_objective",
    "train", "recommend", "save_checkpoint", "load_checkpoint", "sigmoid",
    "MODES", "VARIANTS", "CONDITIONS", "NOISE_FRACTIONS", "RANGES",
]
