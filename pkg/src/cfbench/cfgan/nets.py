"""Sigmoid multilayer perceptrons with hand-written backpropagation and ADAM."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .. import _fallback, kernels


class NonFiniteGradientError(FloatingPointError):
    """Raised when a gradient contains NaN or infinity."""


def sigmoid(x):
    return expit(x)


class Mlp:
    """Fully connected network with a sigmoid after every layer.

    ``layers`` is a list of ``(W, b)`` with ``W`` of shape (fan_in, fan_out).
    """

    def __init__(self, layers, name="net"):
        self.layers = [(np.asarray(w), np.asarray(b)) for w, b in layers]
        self.name = name
        for i in range(1, len(self.layers)):
            if self.layers[i - 1][0].shape[1] != self.layers[i][0].shape[0]:
                raise ValueError(f"{name}: layer {i} input width does not match layer {i - 1} output")
        for i, (w, b) in enumerate(self.layers):
            if b.shape != (w.shape[1],):
                raise ValueError(f"{name}: bias of layer {i} has shape {b.shape}")

    @classmethod
    def init(cls, sizes, rng, dtype=np.float32, name="net"):
        """Glorot-uniform weights and zero biases for widths ``sizes``."""
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, (fan_in, fan_out)).astype(dtype)
            layers.append((w, np.zeros(fan_out, dtype=dtype)))
        return cls(layers, name)

    @property
    def sizes(self):
        return [self.layers[0][0].shape[0]] + [w.shape[1] for w, _ in self.layers]

    @property
    def input_width(self):
        return self.layers[0][0].shape[0]

    @property
    def output_width(self):
        return self.layers[-1][0].shape[1]

    @property
    def dtype(self):
        return self.layers[0][0].dtype

    def params(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live arrays."""
        return [p for layer in self.layers for p in layer]

    def copy(self):
        return Mlp([(w.copy(), b.copy()) for w, b in self.layers], self.name)

    def all_finite(self):
        return all(np.isfinite(p).all() for p in self.params())

    def forward(self, x, keep=False):
        """Output for inputs ``x`` (batch x input_width).

        With ``keep=True`` returns ``(output, activations)`` where the
        activations list starts with ``x`` and is needed by :meth:`backward`.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise ValueError(f"{self.name}: expected input of width {self.input_width}, got shape {x.shape}")
        acts = [x]
        a = x
        for w, b in self.layers:
            a = sigmoid(a @ w + b)
            acts.append(a)
        return (a, acts) if keep else a

    def backward(self, acts, grad_out, need_params=True, need_input=False):
        """Gradients of a loss given ``grad_out`` = dLoss/dOutput.

        Returns ``(param_grads, input_grad)``; either may be ``None`` when
        not requested.
        """
        delta = grad_out * acts[-1] * (1.0 - acts[-1])
        grads = [None] * (2 * len(self.layers)) if need_params else None
        input_grad = None
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            if need_params:
                grads[2 * i] = acts[i].T @ delta
                grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                a = acts[i]
                delta = (delta @ w.T) * a * (1.0 - a)
            elif need_input:
                input_grad = delta @ w.T
        return grads, input_grad


class AdamState:
    """First and second moment estimates for every parameter of an :class:`Mlp`."""

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, net):
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]
        self.t = 0

    def copy(self):
        new = AdamState.__new__(AdamState)
        new.m = [a.copy() for a in self.m]
        new.v = [a.copy() for a in self.v]
        new.t = self.t
        return new

    def step(self, params, grads, lr, decay=None):
        """Bias-corrected ADAM update applied in place.

        ``decay[i]`` (default 0) adds ``decay[i] * params[i]`` to gradient ``i``
        before the update.
        """
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        step_size = lr / (1.0 - b1 ** self.t)
        v_scale = 1.0 / np.sqrt(1.0 - b2 ** self.t)
        if decay is None:
            decay = [0.0] * len(params)
        for p, g, m, v, l2 in zip(params, grads, self.m, self.v, decay):
            fused = (p.flags.c_contiguous and g.flags.c_contiguous and p.dtype == g.dtype
                     and p.dtype in (np.float32, np.float64))
            args = (float(l2), b1, b2, self.eps, float(step_size), float(v_scale))
            if fused:
                kernels.adam_update(p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1), *args)
            else:
                _fallback.adam_update(p, g, m, v, *args)


def add_weight_decay(net, grads, l2):
    """Add ``l2 * W`` to the weight gradients; biases are not regularized."""
    if l2:
        for i, (w, _) in enumerate(net.layers):
            grads[2 * i] = grads[2 * i] + l2 * w
    return grads


def weight_decay(net, l2):
    """Per-parameter decay coefficients: ``l2`` for weights, zero for biases."""
    return [float(l2) if i % 2 == 0 else 0.0 for i in range(2 * len(net.layers))]


def check_finite(net, grads):
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            kind = "weights" if i % 2 == 0 else "bias"
            raise NonFiniteGradientError(f"non-finite gradient in {net.name} layer {i // 2} {kind}")


def backprop_and_step(net, adam, grad_out, acts, l2, lr):
    """One ADAM step on ``net`` from the output gradient of a cached forward pass."""
    grads, _ = net.backward(acts, grad_out)
    check_finite(net, grads)
    # weight decay on weights only, fused into the update
    adam.step(net.params(), grads, lr, decay=weight_decay(net, l2))
    return net, adam
