"""Adversarial training loop with periodic validation and early stopping."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..metrics import evaluate
from ..tuning.early_stopping import STOP, early_stop_step
from .core import (build_condition_batch, discriminator_loss, discriminator_loss_grads,
                   generator_adv_grad, generator_loss, sample_noise, sample_zero_mask)
from .config import NoiseSpec
from .nets import AdamState, Mlp, check_finite, weight_decay


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, epoch, message):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float
    g_loss: float
    seconds: float
    validation: float | None = None


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    best_value: float | None = None
    stopped_epoch: int = 0
    seconds: float = 0.0

    def __len__(self):
        return len(self.records)

    def to_dict(self):
        return {"best_epoch": self.best_epoch, "best_value": self.best_value,
                "stopped_epoch": self.stopped_epoch, "seconds": self.seconds,
                "records": [r.__dict__ for r in self.records]}


def orient(matrix, mode):
    """The matrix whose rows the generator models: users (user mode) or items."""
    return matrix if mode == "user" else matrix.transpose()


def network_sizes(config, n_rows, n_cols):
    noise = NoiseSpec.for_width(config.noise_fraction, n_cols)
    cond = n_cols if config.condition == "profile" else n_rows
    g = [noise.size + cond] + [config.generator.hidden_features] * config.generator.hidden_layers + [n_cols]
    d = [n_cols + cond] + [config.discriminator.hidden_features] * config.discriminator.hidden_layers + [1]
    return noise, g, d


def init_networks(config, n_rows, n_cols, rng):
    noise, g_sizes, d_sizes = network_sizes(config, n_rows, n_cols)
    dtype = np.dtype(config.dtype)
    g = Mlp.init(g_sizes, rng, dtype, name="generator")
    d = Mlp.init(d_sizes, rng, dtype, name="discriminator")
    return noise, g, d


def discriminator_objective(g, d, real, cond, z, keep):
    """Discriminator loss and parameter gradients for one batch.

    ``keep`` marks which generated entries pass the mask (interactions plus
    any partial-masking samples).
    """
    fake = g.forward(np.hstack([z, cond]))
    masked = fake * keep
    b = real.shape[0]
    out, acts = d.forward(np.vstack([np.hstack([real, cond]), np.hstack([masked, cond])]), keep=True)
    p = out[:, 0]
    loss = discriminator_loss(p[:b], p[b:])
    g_real, g_fake = discriminator_loss_grads(p[:b], p[b:])
    grads, _ = d.backward(acts, np.concatenate([g_real, g_fake])[:, None])
    return loss, grads


def generator_objective(g, d, real, cond, z, keep, zr_mask, alpha):
    """Generator loss and parameter gradients for one batch (``zr_mask`` may be None)."""
    n = real.shape[1]
    b = real.shape[0]
    fake, g_acts = g.forward(np.hstack([z, cond]), keep=True)
    masked = fake * keep
    out, d_acts = d.forward(np.hstack([masked, cond]), keep=True)
    p = out[:, 0]
    loss = generator_loss(p, fake, zr_mask, alpha)
    _, d_in = d.backward(d_acts, generator_adv_grad(p)[:, None], need_params=False, need_input=True)
    d_fake = d_in[:, :n] * keep
    if zr_mask is not None and alpha:
        d_fake = d_fake + (2.0 * alpha / b) * np.where(zr_mask, fake, 0).astype(fake.dtype)
    grads, _ = g.backward(g_acts, d_fake)
    return loss, grads


class Trainer:
    """Holds the networks, optimizers and random stream of one training run."""

    def __init__(self, config, train_matrix, seed=0):
        self.config = config
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        oriented = orient(train_matrix, config.mode)
        self.dtype = np.dtype(config.dtype)
        self.profiles = oriented.csr.toarray().astype(self.dtype)
        self.n_rows, self.n_cols = self.profiles.shape
        self.noise, self.g, self.d = init_networks(config, self.n_rows, self.n_cols, self.rng)
        self.g_adam = AdamState(self.g)
        self.d_adam = AdamState(self.d)

    def _batch(self, rows):
        real = self.profiles[rows]
        cond = build_condition_batch(self.config.condition, rows, real, self.n_rows, self.dtype)
        z = sample_noise(self.noise, self.rng, len(rows), self.dtype)
        keep = real != 0
        if self.config.uses_pm:
            keep = keep | sample_zero_mask(real, self.config.pm_ratio, self.rng)
        return real, cond, z, keep.astype(self.dtype)

    def _d_step(self, rows):
        real, cond, z, keep = self._batch(rows)
        loss, grads = discriminator_objective(self.g, self.d, real, cond, z, keep)
        self._apply(self.d, self.d_adam, grads, self.config.discriminator)
        return loss

    def _g_step(self, rows):
        real, cond, z, keep = self._batch(rows)
        zr = sample_zero_mask(real, self.config.zr_ratio, self.rng) if self.config.uses_zr else None
        loss, grads = generator_objective(self.g, self.d, real, cond, z, keep, zr,
                                          self.config.zr_coefficient)
        self._apply(self.g, self.g_adam, grads, self.config.generator)
        return loss

    @staticmethod
    def _apply(net, adam, grads, net_cfg):
        check_finite(net, grads)
        adam.step(net.params(), grads, net_cfg.lr, decay=weight_decay(net, net_cfg.l2))

    def _passes(self, steps, batch_size, step_fn):
        total, count = 0.0, 0
        for _ in range(steps):
            order = self.rng.permutation(self.n_rows)
            for start in range(0, self.n_rows, batch_size):
                total += step_fn(order[start:start + batch_size])
                count += 1
        return total / max(count, 1)

    def epoch(self):
        """Discriminator passes followed by generator passes; returns mean losses."""
        cfg = self.config
        d_loss = self._passes(cfg.discriminator.steps, cfg.discriminator.batch_size, self._d_step)
        g_loss = self._passes(cfg.generator.steps, cfg.generator.batch_size, self._g_step)
        return d_loss, g_loss


def validation_ndcg(generator, config, split, seed, cutoff=10):
    from .model import CfganRecommender

    ranker = CfganRecommender(generator, config, split.train, seed=seed)
    report = evaluate(ranker, split.validation, split.train, cutoffs=(cutoff,), beyond=False)
    return report.get("NDCG", cutoff)


def train(config, split, stopper=None, seed=0, epochs=None, callback=None):
    """Train CFGAN on ``split.train`` (users x items, oriented internally by mode).

    With a ``stopper`` the generator is evaluated on ``split.validation``
    whenever ``stopper.should_evaluate(epoch)`` and the parameters of the
    best evaluation are returned. Without one, exactly ``epochs`` (default
    ``config.max_epochs``) epochs run and the final parameters are returned.
    """
    if stopper is not None and split.validation is None:
        raise ValueError("early stopping needs a validation matrix")
    max_epochs = stopper.max_epochs if stopper is not None else int(epochs or config.max_epochs)
    trainer = Trainer(config, split.train, seed)
    history = TrainingHistory()
    best = trainer.g.copy()
    start = time.perf_counter()
    for epoch in range(1, max_epochs + 1):
        t0 = time.perf_counter()
        d_loss, g_loss = trainer.epoch()
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
            raise DivergenceError(epoch, f"non-finite loss (D={d_loss}, G={g_loss})")
        if not (trainer.g.all_finite() and trainer.d.all_finite()):
            raise DivergenceError(epoch, "non-finite network parameters")
        record = EpochRecord(epoch, d_loss, g_loss, time.perf_counter() - t0)
        history.records.append(record)
        verdict = None
        if stopper is not None and stopper.should_evaluate(epoch):
            # evaluation noise comes from its own stream so it never perturbs training
            record.validation = validation_ndcg(trainer.g, config, split, (seed, epoch), stopper.cutoff)
            prev_best = stopper.best_epoch
            verdict = early_stop_step(stopper, epoch, record.validation)
            if stopper.best_epoch != prev_best:
                best = trainer.g.copy()
        if callback is not None:
            callback(record, trainer)
        if verdict == STOP:
            break
    history.stopped_epoch = len(history.records)
    history.seconds = time.perf_counter() - start
    if stopper is None:
        best = trainer.g.copy()
        history.best_epoch = history.stopped_epoch
    else:
        history.best_epoch = stopper.best_epoch
        history.best_value = stopper.best_value
    return best, history
