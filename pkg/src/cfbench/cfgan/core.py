"""Noise, conditions, masking, and the adversarial losses with their gradients."""

from __future__ import annotations

import numpy as np

CLAMP = 1e-7


def sample_noise(spec, rng, rows=None, dtype=np.float64):
    """Standard-normal noise: a vector of ``spec.size``, or a (rows, size) block."""
    shape = spec.size if rows is None else (rows, spec.size)
    return rng.standard_normal(shape).astype(dtype, copy=False)


def build_condition(condition, row, real_profile, n_rows):
    """Condition vector for one row: its profile, or a one-hot class indicator."""
    if condition == "profile":
        return np.array(real_profile, dtype=np.float64, copy=True)
    if condition == "class":
        if not 0 <= row < n_rows:
            raise IndexError(f"row {row} outside [0, {n_rows})")
        c = np.zeros(n_rows)
        c[row] = 1.0
        return c
    raise ValueError(f"unknown condition kind {condition!r}")


def build_condition_batch(condition, rows, profiles, n_rows, dtype):
    if condition == "profile":
        return np.asarray(profiles, dtype=dtype)
    c = np.zeros((len(rows), n_rows), dtype=dtype)
    c[np.arange(len(rows)), rows] = 1.0
    return c


def generator_forward(g, z, c):
    """Generated profile(s) from noise ``z`` concatenated with condition ``c``."""
    single = np.ndim(c) == 1
    z2, c2 = np.atleast_2d(z), np.atleast_2d(c)
    if z2.shape[1] == 0:
        z2 = np.zeros((c2.shape[0], 0), dtype=c2.dtype)
    out = g.forward(np.hstack([z2, c2]))
    return out[0] if single else out


def discriminator_forward(d, profile, c):
    """Probability that ``profile`` (under condition ``c``) is real."""
    single = np.ndim(profile) == 1
    out = d.forward(np.hstack([np.atleast_2d(profile), np.atleast_2d(c)]))[:, 0]
    return out[0] if single else out


def sample_zero_indices(real_row, ratio_percent, rng):
    """Uniform sample, without replacement, of ``ratio_percent`` % of the zero entries."""
    zeros = np.flatnonzero(np.asarray(real_row) == 0)
    k = int(np.rint(ratio_percent / 100.0 * len(zeros)))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    return np.sort(rng.choice(zeros, size=k, replace=False))


def sample_zero_mask(real, ratio_percent, rng):
    """Batch version of :func:`sample_zero_indices` returning an indicator matrix.

    Each row keeps the ``k`` zero positions with the smallest uniform keys,
    which is a uniform draw of ``k`` of them without replacement.
    """
    real = np.asarray(real)
    is_zero = real == 0
    k = np.rint(ratio_percent / 100.0 * is_zero.sum(axis=1)).astype(np.int64)
    keys = rng.random(real.shape)
    keys[~is_zero] = 2.0
    # a sentinel column keeps the k-th key defined when k equals the row width
    ordered = np.hstack([np.sort(keys, axis=1), np.full((real.shape[0], 1), 3.0)])
    thresh = np.take_along_axis(ordered, k[:, None], axis=1)
    return keys < thresh


def apply_mask(fake, real_row, pm_indices=()):
    """Keep ``fake`` where the real profile has an interaction or at PM positions."""
    fake = np.asarray(fake)
    real_row = np.asarray(real_row)
    if fake.shape != real_row.shape:
        raise ValueError(f"fake has shape {fake.shape} but real profile has {real_row.shape}")
    keep = real_row != 0
    if len(pm_indices):
        keep = keep.copy()
        keep[..., np.asarray(pm_indices, dtype=np.int64)] = True
    return np.where(keep, fake, 0.0)


def _clamp(p):
    return np.clip(p, CLAMP, 1.0 - CLAMP)


def discriminator_loss(d_real, d_fake):
    """Batch mean of ``-log D(real) - log(1 - D(fake))``."""
    d_real, d_fake = _clamp(np.asarray(d_real, dtype=np.float64)), _clamp(np.asarray(d_fake, dtype=np.float64))
    return float(np.mean(-np.log(d_real) - np.log1p(-d_fake)))


def generator_loss(d_fake, fake=None, zr_mask=None, alpha=0.0):
    """Batch mean of ``-log D(fake) + alpha * sum of fake^2 over sampled zeros``.

    ``zr_mask`` selects the zero-reconstruction positions (``None`` for PM).
    """
    d_fake = _clamp(np.asarray(d_fake, dtype=np.float64))
    loss = -np.log(d_fake)
    if zr_mask is not None and alpha:
        f = np.atleast_2d(np.asarray(fake, dtype=np.float64))
        m = np.atleast_2d(zr_mask)
        loss = loss + alpha * np.sum(np.where(m, f * f, 0.0), axis=1).reshape(loss.shape)
    return float(np.mean(loss))


def _clamp_grad(p):
    # the clamp has zero slope outside its range
    return (p > CLAMP) & (p < 1.0 - CLAMP)


def discriminator_loss_grads(d_real, d_fake):
    """dLoss/dD(real) and dLoss/dD(fake) for :func:`discriminator_loss`."""
    b = len(d_real)
    g_real = np.where(_clamp_grad(d_real), -1.0 / (b * np.maximum(d_real, CLAMP)), 0.0)
    g_fake = np.where(_clamp_grad(d_fake), 1.0 / (b * np.maximum(1.0 - d_fake, CLAMP)), 0.0)
    return g_real.astype(d_real.dtype), g_fake.astype(d_fake.dtype)


def generator_adv_grad(d_fake):
    """dLoss/dD(fake) of the non-saturating adversarial term."""
    b = len(d_fake)
    return np.where(_clamp_grad(d_fake), -1.0 / (b * np.maximum(d_fake, CLAMP)), 0.0).astype(d_fake.dtype)
