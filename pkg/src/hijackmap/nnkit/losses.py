"""Training objectives: mean squared error and binary cross-entropy."""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


def mse_loss(outputs: np.ndarray, targets: np.ndarray) -> float:
    """(1 / 2N) * sum((o_i - y_i)^2)."""
    o = np.asarray(outputs, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if o.shape != y.shape:
        raise ValueError(f"output length {o.shape} does not match targets {y.shape}")
    if o.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    return float(np.sum((o - y) ** 2) / (2 * o.size))


def mse_loss_grad(outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    o = np.asarray(outputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    return (o - y) / o.size


def bce_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    """-(1/N) sum[y ln p + (1 - y) ln(1 - p)], with p clamped to [eps, 1-eps]."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"probability length {p.shape} does not match targets {y.shape}")
    if p.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_loss_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return (p - y) / (p * (1.0 - p)) / p.size


LOSSES = {
    "mse": (mse_loss, mse_loss_grad),
    "bce": (bce_loss, bce_loss_grad),
}
