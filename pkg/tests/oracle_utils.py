"""Independent brute-force oracles used by both unit and acceptance tests.

These deliberately avoid the library's vectorized code paths: plain loops
and dict arithmetic only, so they stay a genuinely separate route to the
same numbers.
"""

from __future__ import annotations

import math

import numpy as np


def brute_force_tfidf(corpus: list[list[str]], doc: list[str]) -> np.ndarray:
    """tf-idf transform computed with nested loops over a sorted vocabulary."""
    vocab = sorted({term for d in corpus for term in d})
    n_docs = len(corpus)
    vec = np.zeros(len(vocab))
    for j, term in enumerate(vocab):
        count = sum(1 for t in doc if t == term)
        df = sum(1 for d in corpus if term in d)
        idf = math.log((1 + n_docs) / (1 + df)) + 1.0
        vec[j] = count * idf
    norm = math.sqrt(sum(v * v for v in vec))
    if norm > 0:
        vec = vec / norm
    return vec


def brute_force_multi_head(x, heads, w_q, w_k, w_v, w_o):
    """Re-derivation of multi-head attention with per-head slices and loops."""
    n, d_model = x.shape
    d_k = d_model // heads
    out_heads = []
    for h in range(heads):
        cols = slice(h * d_k, (h + 1) * d_k)
        q = x @ w_q[:, cols]
        k = x @ w_k[:, cols]
        v = x @ w_v[:, cols]
        scores = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                scores[i, j] = float(q[i] @ k[j]) / math.sqrt(d_k)
        attn = np.zeros((n, n))
        for i in range(n):
            row = np.exp(scores[i] - scores[i].max())
            attn[i] = row / row.sum()
        out_heads.append(attn @ v)
    return np.concatenate(out_heads, axis=1) @ w_o


def fd_layer_check(layer, x, rng, step=1e-5):
    """Max relative error of a layer's backward pass vs central differences.

    Probes every parameter entry and, for float inputs, every input entry,
    against the scalar objective sum(forward(x) * R) for a fixed random R.
    """
    from hijackmap.nnkit.gradcheck import relative_error

    R = rng.normal(size=layer.forward(x).shape)

    def objective():
        return float(np.sum(layer.forward(x) * R))

    layer.zero_grad()
    layer.forward(x)
    d_in = layer.backward(R.copy())
    worst = 0.0

    def probe(array, grads):
        nonlocal worst
        flat, gflat = array.ravel(), grads.ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = objective()
            flat[i] = saved - step
            down = objective()
            flat[i] = saved
            worst = max(worst, relative_error(gflat[i], (up - down) / (2 * step)))

    for name, param in layer.parameters().items():
        probe(param, layer.gradients()[name])
    if np.issubdtype(np.asarray(x).dtype, np.floating):
        probe(x, d_in)
    return worst
