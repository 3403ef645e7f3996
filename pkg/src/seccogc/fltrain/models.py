"""Flat-parameter classifiers with analytic cross-entropy gradients."""

from __future__ import annotations

import numpy as np

from .. import rng as rngmod


def _softmax_xent(logits: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -logp[np.arange(n), y].mean()
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    return loss, dz / n


class LogisticRegression:
    """Multinomial logistic regression; parameters are ``[W.ravel(), b]``."""

    name = "logreg"

    def __init__(self, n_features: int, n_classes: int):
        self.n_features = n_features
        self.n_classes = n_classes
        self.dim = n_features * n_classes + n_classes

    def _unpack(self, theta):
        F, C = self.n_features, self.n_classes
        return theta[: F * C].reshape(F, C), theta[F * C:]

    def init(self, seed: int = 0) -> np.ndarray:
        return np.zeros(self.dim)

    def logits(self, theta, X):
        W, b = self._unpack(theta)
        return X @ W + b

    def loss_and_grad(self, theta, X, y):
        W, b = self._unpack(theta)
        loss, dz = _softmax_xent(X @ W + b, y)
        return loss, np.concatenate([(X.T @ dz).ravel(), dz.sum(axis=0)])


class MLP:
    """One tanh hidden layer; parameters are ``[W1, b1, W2, b2]`` flattened."""

    name = "mlp"

    def __init__(self, n_features: int, n_classes: int, hidden: int = 32):
        self.n_features = n_features
        self.n_classes = n_classes
        self.hidden = hidden
        F, H, C = n_features, hidden, n_classes
        self._shapes = [(F, H), (H,), (H, C), (C,)]
        self.dim = F * H + H + H * C + C

    def _unpack(self, theta):
        out, pos = [], 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            out.append(theta[pos:pos + size].reshape(shape))
            pos += size
        return out

    def init(self, seed: int = 0) -> np.ndarray:
        gen = rngmod.stream(seed, rngmod.MODEL_INIT)
        F, H, C = self.n_features, self.hidden, self.n_classes
        W1 = gen.standard_normal((F, H)) / np.sqrt(F)
        W2 = gen.standard_normal((H, C)) / np.sqrt(H)
        return np.concatenate([W1.ravel(), np.zeros(H), W2.ravel(), np.zeros(C)])

    def logits(self, theta, X):
        W1, b1, W2, b2 = self._unpack(theta)
        return np.tanh(X @ W1 + b1) @ W2 + b2

    def loss_and_grad(self, theta, X, y):
        W1, b1, W2, b2 = self._unpack(theta)
        h = np.tanh(X @ W1 + b1)
        loss, dz = _softmax_xent(h @ W2 + b2, y)
        dh = (dz @ W2.T) * (1.0 - h**2)
        return loss, np.concatenate([
            (X.T @ dh).ravel(), dh.sum(axis=0), (h.T @ dz).ravel(), dz.sum(axis=0),
        ])


def make_model(kind: str, n_features: int, n_classes: int, hidden: int = 32):
    if kind == "logreg":
        return LogisticRegression(n_features, n_classes)
    if kind == "mlp":
        return MLP(n_features, n_classes, hidden)
    raise ValueError(f"unknown model {kind!r}; expected 'logreg' or 'mlp'")
