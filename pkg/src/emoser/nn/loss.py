"""Softmax cross-entropy with the fused, numerically stable backward."""

from __future__ import annotations

import numpy as np


class LabelOutOfRange(Exception):
    pass


def softmax_xent(logits: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stable softmax + categorical cross-entropy.

    Accepts a single logit vector with an int label, or a (N, K) batch with a
    label vector. Returns (probs, losses, grads) where the combined gradient
    of the loss w.r.t. the logits is probs - one_hot(label), per example.
    """
    z = np.asarray(logits)
    single = z.ndim == 1
    if single:
        z = z[None, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    n, k = z.shape
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelOutOfRange(f"labels must be in [0, {k}), got {labels.min()}..{labels.max()}")

    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    probs = np.exp(shifted - log_norm[:, None])
    losses = log_norm - shifted[np.arange(n), labels]
    grads = probs.copy()
    grads[np.arange(n), labels] -= 1.0

    if single:
        return probs[0], losses[0], grads[0]
    return probs, losses, grads
