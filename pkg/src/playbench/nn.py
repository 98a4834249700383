"""Minimal feedforward networks with hand-derived gradients.

Dense ReLU stacks in float64, trained with momentum SGD. Everything is
explicit numpy so the analytic gradients can be checked against central
finite differences to tight tolerance; no autograd framework is involved.
Inference is a fixed chain of small matmuls, so its cost depends on the
layer shapes and never on how much demonstration data stood behind the
training set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NET_FORMAT = "playbench/net"
NET_VERSION = 1


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0).astype(np.float64)


class DenseNet:
    """Fully connected stack: ReLU on hidden layers, linear output."""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator):
        if len(dims) < 2:
            raise ValueError(f"need input and output dims, got {dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer widths must be >= 1, got {dims}")
        self.dims = tuple(int(d) for d in dims)
        self.weights = [
            rng.standard_normal((dims[i], dims[i + 1])) * math.sqrt(2.0 / dims[i])
            for i in range(len(dims) - 1)
        ]
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """(output, pre-activations per layer); x is (batch, dims[0])."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        pres = []
        a = x
        for i in range(self.n_layers):
            z = a @ self.weights[i] + self.biases[i]
            pres.append(z)
            a = relu(z) if i < self.n_layers - 1 else z
        return a, pres

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, x: np.ndarray, pres: list[np.ndarray], grad_out: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of the loss w.r.t. weights and biases.

        grad_out is dLoss/dOutput for the batch; activations are
        recomputed from the cached pre-activations.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acts = [x]
        for i in range(self.n_layers - 1):
            acts.append(relu(pres[i]))
        grad_w = [np.empty(0)] * self.n_layers
        grad_b = [np.empty(0)] * self.n_layers
        delta = np.asarray(grad_out, dtype=np.float64)
        for i in range(self.n_layers - 1, -1, -1):
            grad_w[i] = acts[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * relu_grad(pres[i - 1])
        return grad_w, grad_b

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "DenseNet":
        clone = object.__new__(DenseNet)
        clone.dims = self.dims
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all entries; returns (loss, dLoss/dPred)."""
    diff = pred - target
    loss = float((diff**2).mean())
    return loss, 2.0 * diff / diff.size


def bce_logits_loss(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-channel sigmoid cross-entropy, numerically stable form."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    # log(1 + exp(-|z|)) + max(z, 0) - z*y
    loss = float((np.logaddexp(0.0, -np.abs(z)) + np.maximum(z, 0.0) - z * y).mean())
    return loss, (sigmoid(z) - y) / z.size


def sigmoid(z: np.ndarray) -> np.ndarray:
    # exp overflow for very negative z saturates to the correct limit 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


class MomentumSGD:
    """Plain momentum descent; deterministic under a fixed batch order."""

    def __init__(self, net: DenseNet, learning_rate: float, momentum: float = 0.9):
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.net = net
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._vel_w = [np.zeros_like(w) for w in net.weights]
        self._vel_b = [np.zeros_like(b) for b in net.biases]

    def step(self, grad_w: list[np.ndarray], grad_b: list[np.ndarray]) -> None:
        for i in range(self.net.n_layers):
            self._vel_w[i] = self.momentum * self._vel_w[i] - self.learning_rate * grad_w[i]
            self._vel_b[i] = self.momentum * self._vel_b[i] - self.learning_rate * grad_b[i]
            self.net.weights[i] += self._vel_w[i]
            self.net.biases[i] += self._vel_b[i]


def net_to_doc(net: DenseNet) -> dict:
    return {
        "dims": list(net.dims),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def net_from_doc(doc: dict) -> DenseNet:
    net = object.__new__(DenseNet)
    net.dims = tuple(int(d) for d in doc["dims"])
    net.weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
    net.biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
    return net
