"""Numerically stable loss heads.

Both losses return (mean loss as float, gradient w.r.t. logits).  The
gradient already includes the 1/N mean factor.
"""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of integer ``targets`` under softmax(logits)."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsumexp - z[np.arange(n), targets]))
    grad = softmax(logits)
    grad[np.arange(n), targets] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy with 0/1 ``targets`` on raw logits."""
    x = logits.astype(np.float64).ravel()
    t = targets.astype(np.float64).ravel()
    n = x.shape[0]
    # log(1+exp(-|x|)) + max(x,0) - t*x is the stable form of
    # -t*log(sigmoid) - (1-t)*log(1-sigmoid).
    loss = float(np.mean(np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0) - t * x))
    grad = ((sigmoid(x) - t) / n).reshape(logits.shape)
    return loss, grad.astype(logits.dtype)
