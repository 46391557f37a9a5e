"""Batch-mean losses. Each returns ``(loss, d loss / d prediction)``."""
from __future__ import annotations

import numpy as np

BCE_CLAMP = 1e-7


def bce(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = pred.shape[0] if pred.ndim else 1
    loss = -np.sum(target * np.log(p) + (1 - target) * np.log(1 - p)) / n
    grad = (p - target) / (p * (1 - p)) / n
    # clamped entries carry no gradient through the clamp
    grad = np.where((pred < BCE_CLAMP) | (pred > 1 - BCE_CLAMP), 0.0, grad)
    return float(loss), grad


def cross_entropy(logits, labels):
    """Softmax cross-entropy; ``labels`` are integer class indices."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != logits.shape[0]:
        raise ValueError("one class index per row expected")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("class index out of range")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    n = logits.shape[0]
    rows = np.arange(n)
    loss = -logp[rows, labels].sum() / n
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return float(loss), grad / n


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    return pred, target


def mse(pred, target):
    pred, target = _check(pred, target)
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def l1(pred, target):
    pred, target = _check(pred, target)
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def l1_mse(pred, target):
    a, ga = l1(pred, target)
    b, gb = mse(pred, target)
    return a + b, ga + gb


LOSSES = {"BCE": bce, "CrossEntropy": cross_entropy, "MSE": mse, "L1": l1, "L1+MSE": l1_mse}


def loss(kind: str, prediction, target):
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}") from None
    return fn(prediction, target)
