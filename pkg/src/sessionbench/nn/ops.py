"""Numerically stable primitives: one-hot, softmax cross-entropy, sigmoid BCE."""

from __future__ import annotations

import numpy as np

from ..errors import InputError


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def one_hot(indices, depth: int) -> np.ndarray:
    indices = np.asarray(indices)
    out = np.zeros(indices.shape + (depth,))
    valid = (indices >= 0) & (indices < depth)
    out[np.nonzero(valid) + (indices[valid],)] = 1.0
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss -log softmax(logits)[target] and its gradient w.r.t. logits."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise InputError("logits must be a vector of length >= 2")
    if not 0 <= target < logits.shape[0]:
        raise IndexError(f"target {target} out of range for {logits.shape[0]} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = float(log_z - shifted[target])
    grad = np.exp(shifted - log_z)
    grad[target] -= 1.0
    return loss, grad


def softmax_cross_entropy_rows(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cross entropy: (losses (N,), gradients (N, K))."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    losses = log_z - shifted[rows, targets]
    grads = np.exp(shifted - log_z[:, None])
    grads[rows, targets] -= 1.0
    return losses, grads


def sigmoid_bce(logit, target) -> tuple[float, float]:
    """Binary cross entropy on a logit, in the stable log-sum-exp form.

    loss = max(z, 0) - z*y + log(1 + exp(-|z|)); gradient = sigmoid(z) - y.
    """
    z = float(logit)
    y = float(target)
    loss = max(z, 0.0) - z * y + np.log1p(np.exp(-abs(z)))
    return loss, float(sigmoid(z) - y)


def sigmoid_bce_rows(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(logits, dtype=float)
    y = np.asarray(targets, dtype=float)
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return losses, sigmoid(z) - y
