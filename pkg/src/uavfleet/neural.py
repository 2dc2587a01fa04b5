"""Small dense-network engine: MLPs with hand-derived gradients, Adam, soft updates.

Everything runs in float64 numpy for bit-reproducibility at desk scale.
Gradients are verified against central finite differences in the test suite.
"""

from __future__ import annotations

import json

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(RuntimeError):
    """Training halt: a loss or gradient stopped being finite."""


class Mlp:
    """Fully-connected net, ReLU hidden layers, linear output."""

    def __init__(self, layer_sizes, rng=None):
        if len(layer_sizes) < 2:
            raise ShapeError("need at least input and output sizes")
        self.layer_sizes = list(layer_sizes)
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def forward(self, x):
        """Evaluate on a single vector or a batch (N, d_in)."""
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.shape[1] != self.layer_sizes[0]:
            raise ShapeError(f"input dim {h.shape[1]} != {self.layer_sizes[0]}")
        cache = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return (h[0] if squeeze else h), cache

    def backward(self, cache, upstream):
        """Gradients of sum(output * upstream) w.r.t. parameters and input.

        `upstream` matches the (batched) output shape; returns (grads, d_input)
        where grads is a list of (dW, db) per layer.
        """
        upstream = np.asarray(upstream, dtype=float)
        if upstream.ndim == 1:
            upstream = upstream[None, :]
        if upstream.shape != cache[-1].shape:
            raise ShapeError(f"upstream shape {upstream.shape} != output {cache[-1].shape}")
        grads = [None] * self.n_layers
        delta = upstream
        for i in range(self.n_layers - 1, -1, -1):
            if i < self.n_layers - 1:
                delta = delta * (cache[i + 1] > 0.0)
            grads[i] = (cache[i].T @ delta, delta.sum(axis=0))
            delta = delta @ self.weights[i].T
        return grads, delta

    def params(self):
        return self.weights + self.biases

    def set_params(self, params):
        n = self.n_layers
        for i in range(n):
            if params[i].shape != self.weights[i].shape:
                raise ShapeError("weight shape mismatch")
            if params[n + i].shape != self.biases[i].shape:
                raise ShapeError("bias shape mismatch")
        self.weights = [p.copy() for p in params[:n]]
        self.biases = [p.copy() for p in params[n:]]

    def copy(self):
        clone = Mlp.__new__(Mlp)
        clone.layer_sizes = list(self.layer_sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


class Adam:
    """Bias-corrected adaptive-moment optimizer."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr):
        if len(grads) != len(params):
            raise ShapeError("params/grads length mismatch")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("non-finite gradient; halting training")
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mhat = self.m[i] / (1 - self.beta1 ** self.t)
            vhat = self.v[i] / (1 - self.beta2 ** self.t)
            out.append(p - lr * mhat / (np.sqrt(vhat) + self.eps))
        return out


def flatten_grads(layer_grads):
    """[(dW, db), ...] -> [dW..., db...] matching Mlp.params() order."""
    return [g[0] for g in layer_grads] + [g[1] for g in layer_grads]


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place."""
    if target.layer_sizes != online.layer_sizes:
        raise ShapeError("target/online architecture mismatch")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob


def softmax(logits, mask=None):
    """Stable softmax; masked entries get exactly zero probability."""
    z = np.asarray(logits, dtype=float)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ShapeError("mask admits no action")
        z = np.where(mask, z, -np.inf)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# checkpoints: JSON containers; float repr round-trips bit-exactly

def save_checkpoint(path, net: Mlp, optimizer: Adam | None = None, extra: dict | None = None):
    blob = {
        "version": 1,
        "layer_sizes": net.layer_sizes,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if optimizer is not None:
        blob["adam"] = {
            "t": optimizer.t,
            "beta1": optimizer.beta1, "beta2": optimizer.beta2, "eps": optimizer.eps,
            "m": [m.tolist() for m in optimizer.m],
            "v": [v.tolist() for v in optimizer.v],
        }
    if extra:
        blob["extra"] = extra
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_checkpoint(path):
    with open(path) as fh:
        blob = json.load(fh)
    net = Mlp.__new__(Mlp)
    net.layer_sizes = list(blob["layer_sizes"])
    net.weights = [np.array(w, dtype=float) for w in blob["weights"]]
    net.biases = [np.array(b, dtype=float) for b in blob["biases"]]
    opt = None
    if "adam" in blob:
        a = blob["adam"]
        opt = Adam(net.params(), beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"])
        opt.t = a["t"]
        opt.m = [np.array(m, dtype=float) for m in a["m"]]
        opt.v = [np.array(v, dtype=float) for v in a["v"]]
    return net, opt, blob.get("extra")
