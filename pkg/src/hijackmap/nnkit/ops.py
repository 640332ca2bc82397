"""Functional forward operations shared by the layer classes and tests.

Convolution is cross-correlation (no kernel flip) with valid padding, so an
input of length L and a kernel of width m produce exactly L - m + 1 outputs.
"""

from __future__ import annotations

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


_ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "none": lambda x: x,
}


def _activate(x: np.ndarray, activation: str) -> np.ndarray:
    try:
        return _ACTIVATIONS[activation](x)
    except KeyError:
        raise ValueError(f"unknown activation {activation!r}") from None


def dense_forward(
    x: np.ndarray, W: np.ndarray, b: np.ndarray, activation: str = "none"
) -> np.ndarray:
    """y_j = act(sum_i W[j, i] x_i + b_j) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {W.shape}")
    if x.shape != (W.shape[1],):
        raise ValueError(f"input shape {x.shape} does not match weights {W.shape}")
    if b.shape != (W.shape[0],):
        raise ValueError(f"bias shape {b.shape} does not match weights {W.shape}")
    return _activate(W @ x + b, activation)


def conv1d_forward(
    x: np.ndarray,
    kernels: np.ndarray,
    bias: np.ndarray,
    activation: str = "relu",
) -> np.ndarray:
    """Valid 1-D cross-correlation over an (L, C_in) signal.

    h[i, c] = sum_k sum_d kernels[c, k, d] * x[i + k - 1, d] + bias[c],
    followed by the given activation (ReLU by default).
    """
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    c_out, m, c_in = kernels.shape
    length = x.shape[0]
    if x.shape[1] != c_in:
        raise ValueError(f"input channels {x.shape[1]} do not match kernels {c_in}")
    if length < m:
        raise ValueError(f"input length {length} shorter than kernel width {m}")
    windows = np.lib.stride_tricks.sliding_window_view(x, m, axis=0)  # (L', C_in, m)
    out = np.einsum("idk,okd->io", windows, kernels, optimize=True) + bias
    return _activate(out, activation)


def maxpool1d_forward(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Per-channel windowed maximum over an (L, C) signal."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    length = x.shape[0]
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    if length < window:
        raise ValueError(f"input length {length} shorter than pool window {window}")
    n_out = (length - window) // stride + 1
    starts = np.arange(n_out) * stride
    stacked = np.stack([x[s : s + window] for s in starts], axis=0)  # (n_out, window, C)
    return stacked.max(axis=1)


def scaled_dot_attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V with row-wise softmax."""
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if Q.shape[-1] != K.shape[-1]:
        raise ValueError(f"query width {Q.shape[-1]} does not match key width {K.shape[-1]}")
    if K.shape[-2] != V.shape[-2]:
        raise ValueError(f"key count {K.shape[-2]} does not match value count {V.shape[-2]}")
    d_k = Q.shape[-1]
    scores = Q @ np.swapaxes(K, -1, -2) / np.sqrt(d_k)
    weights = softmax(scores, axis=-1)
    return weights @ V


def scaled_dot_attention_backward(
    Q: np.ndarray, K: np.ndarray, V: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of scaled_dot_attention with respect to Q, K, V.

    Works for plain (n, d) operands and for batched (..., n, d) stacks.
    """
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    d_k = Q.shape[-1]
    scale = 1.0 / np.sqrt(d_k)
    scores = Q @ np.swapaxes(K, -1, -2) * scale
    A = softmax(scores, axis=-1)
    dV = np.swapaxes(A, -1, -2) @ d_out
    dA = d_out @ np.swapaxes(V, -1, -2)
    # Row-wise softmax Jacobian: dS = A * (dA - sum(dA * A, axis=-1)).
    dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True))
    dQ = dS @ K * scale
    dK = np.swapaxes(dS, -1, -2) @ Q * scale
    return dQ, dK, dV


def multi_head_attention(
    X: np.ndarray,
    heads: int,
    W_q: np.ndarray,
    W_k: np.ndarray,
    W_v: np.ndarray,
    W_o: np.ndarray,
) -> np.ndarray:
    """Concat(head_1, ..., head_h) W_o over an (n, d_model) input.

    Each projection is a (d_model, d_model) matrix whose columns are split
    evenly across heads, so head i attends in a d_model/h wide subspace.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d_model = X.shape
    if d_model % heads != 0:
        raise ValueError(f"d_model {d_model} is not divisible by {heads} heads")
    d_k = d_model // heads
    Q = X @ W_q
    K = X @ W_k
    V = X @ W_v
    parts = []
    for h in range(heads):
        sl = slice(h * d_k, (h + 1) * d_k)
        parts.append(scaled_dot_attention(Q[:, sl], K[:, sl], V[:, sl]))
    return np.concatenate(parts, axis=1) @ W_o
