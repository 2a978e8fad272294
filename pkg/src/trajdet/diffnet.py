"""Minimal dense-network core: layers, activations, losses, optimizer,
checkpoint I/O. Double precision throughout; exact reverse-mode gradients.

Sized for the small heads this project needs; deliberately not a general
autodiff graph.
"""

from __future__ import annotations

import json
import math

import numpy as np

ACTIVATIONS = ("linear", "relu", "tanh")


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "linear":
        return x
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(pre)
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - post * post
    raise ValueError(f"unknown activation {name!r}")


class Dense:
    """Affine layer followed by an elementwise activation."""

    def __init__(self, n_in: int, n_out: int, activation: str, rng: np.random.Generator | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        if rng is None:
            self.W = np.zeros((n_out, n_in))
        else:
            scale = math.sqrt(2.0 / n_in) if activation == "relu" else math.sqrt(1.0 / n_in)
            self.W = rng.normal(0.0, scale, size=(n_out, n_in))
        self.b = np.zeros(n_out)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x: np.ndarray | None = None
        self._pre: np.ndarray | None = None
        self._post: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.W.shape[1]:
            raise ValueError(f"expected input (*, {self.W.shape[1]}), got {x.shape}")
        self._x = x
        self._pre = x @ self.W.T + self.b
        self._post = _act(self.activation, self._pre)
        return self._post

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        dpre = dout * _act_grad(self.activation, self._pre, self._post)
        self.dW += dpre.T @ self._x
        self.db += dpre.sum(axis=0)
        return dpre @ self.W


class MLP:
    """A stack of Dense layers; batched forward/backward with cached state."""

    def __init__(self, dims: list[int], activations: list[str], rng: np.random.Generator | None = None):
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        self.layers = [
            Dense(dims[i], dims[i + 1], activations[i], rng) for i in range(len(dims) - 1)
        ]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.W, layer.b])
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.dW, layer.db])
        return out

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.dW[:] = 0.0
            layer.db[:] = 0.0


def smooth_l1(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean-reduced smooth L1 (0.5 d^2 inside |d|<1, |d|-0.5 outside)."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    d = pred - target
    absd = np.abs(d)
    inner = absd < 1.0
    per = np.where(inner, 0.5 * d * d, absd - 0.5)
    grad = np.where(inner, d, np.sign(d)) / d.size
    return float(per.mean()), grad


def binary_ce(logit: float, label: int) -> tuple[float, float]:
    """Numerically stable binary cross-entropy on a raw logit."""
    z = float(logit)
    loss = max(z, 0.0) - z * label + math.log1p(math.exp(-abs(z)))
    grad = sigmoid(z) - label
    return loss, grad


def binary_ce_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = sigmoid(z) - y
    return loss, grad


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; step skipped")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / b1t
            vhat = v / b2t
            p -= self.lr * self.weight_decay * p
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _fmt(x: float) -> float:
    # json round-trips Python floats exactly (repr is shortest exact form)
    return float(x)


def mlp_to_json(mlp: MLP) -> dict:
    return {
        "layers": [
            {
                "n_in": layer.W.shape[1],
                "n_out": layer.W.shape[0],
                "activation": layer.activation,
                "W": [[_fmt(v) for v in row] for row in layer.W],
                "b": [_fmt(v) for v in layer.b],
            }
            for layer in mlp.layers
        ]
    }


def mlp_from_json(obj: dict) -> MLP:
    dims = [obj["layers"][0]["n_in"]] + [l["n_out"] for l in obj["layers"]]
    acts = [l["activation"] for l in obj["layers"]]
    mlp = MLP(dims, acts, rng=None)
    for layer, lobj in zip(mlp.layers, obj["layers"]):
        layer.W = np.array(lobj["W"], dtype=np.float64).reshape(lobj["n_out"], lobj["n_in"])
        layer.b = np.array(lobj["b"], dtype=np.float64)
        layer.dW = np.zeros_like(layer.W)
        layer.db = np.zeros_like(layer.b)
    return mlp


def save_checkpoint(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
