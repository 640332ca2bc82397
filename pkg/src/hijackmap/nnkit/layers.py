"""Layers with explicit forward/backward passes over float64 arrays.

Every layer caches what its backward pass needs during forward, adds
parameter gradients into its own buffers, and returns the gradient with
respect to its input. Parameter tensors are named ``<layer>.<slot>`` so a
whole network flattens into one ordered name -> array mapping, which is
what the optimizer, the checkpoints and the gradient checker all consume.
"""

from __future__ import annotations

import numpy as np

from hijackmap.nnkit.ops import scaled_dot_attention_backward, sigmoid, softmax


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


class Layer:
    """Base class; parameter-free layers inherit the empty dict defaults."""

    name: str = ""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict[str, np.ndarray]:
        return {}

    def gradients(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grad(self) -> None:
        for g in self.gradients().values():
            g.fill(0.0)


class Dense(Layer):
    """Fully connected layer, y = act(x W^T + b), over any leading dims."""

    def __init__(self, name: str, n_in: int, n_out: int, activation: str, rng: np.random.Generator):
        if activation not in ("relu", "sigmoid", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.name = name
        self.activation = activation
        self.W = glorot(rng, (n_out, n_in), n_in, n_out)
        self.b = np.zeros(n_out, dtype=np.float64)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x: np.ndarray | None = None
        self._y: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        z = x @ self.W.T + self.b
        if self.activation == "relu":
            y = np.maximum(z, 0.0)
        elif self.activation == "sigmoid":
            y = sigmoid(z)
        else:
            y = z
        self._y = y
        return y

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        y = self._y
        if self.activation == "relu":
            dz = d_out * (y > 0.0)
        elif self.activation == "sigmoid":
            dz = d_out * y * (1.0 - y)
        else:
            dz = d_out
        n_in = self.W.shape[1]
        n_out = self.W.shape[0]
        x2 = self._x.reshape(-1, n_in)
        dz2 = dz.reshape(-1, n_out)
        self.dW += dz2.T @ x2
        self.db += dz2.sum(axis=0)
        return (dz2 @ self.W).reshape(self._x.shape)

    def parameters(self):
        return {f"{self.name}.W": self.W, f"{self.name}.b": self.b}

    def gradients(self):
        return {f"{self.name}.W": self.dW, f"{self.name}.b": self.db}


class AddChannel(Layer):
    """(N, L) -> (N, L, 1), presenting a flat vector as a 1-channel signal."""

    def __init__(self, name: str = "addchannel"):
        self.name = name

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x[:, :, None]

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        return d_out[:, :, 0]


class Conv1d(Layer):
    """Valid cross-correlation plus ReLU over (N, L, C_in) signals."""

    def __init__(self, name: str, c_in: int, c_out: int, width: int, rng: np.random.Generator):
        self.name = name
        self.width = width
        self.K = glorot(rng, (c_out, width, c_in), width * c_in, width * c_out)
        self.b = np.zeros(c_out, dtype=np.float64)
        self.dK = np.zeros_like(self.K)
        self.db = np.zeros_like(self.b)
        self._windows: np.ndarray | None = None
        self._mask: np.ndarray | None = None
        self._in_len = 0

    def out_length(self, in_len: int) -> int:
        return in_len - self.width + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] < self.width:
            raise ValueError(
                f"{self.name}: input length {x.shape[1]} shorter than kernel width {self.width}"
            )
        self._in_len = x.shape[1]
        windows = np.lib.stride_tricks.sliding_window_view(x, self.width, axis=1)
        self._windows = windows  # (N, L', C_in, m)
        z = np.einsum("nidk,okd->nio", windows, self.K, optimize=True) + self.b
        self._mask = z > 0.0
        return np.maximum(z, 0.0)

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        dz = d_out * self._mask
        self.dK += np.einsum("nio,nidk->okd", dz, self._windows, optimize=True)
        self.db += dz.sum(axis=(0, 1))
        n, out_len, _ = dz.shape
        dx = np.zeros((n, self._in_len, self.K.shape[2]), dtype=np.float64)
        for k in range(self.width):
            dx[:, k : k + out_len, :] += dz @ self.K[:, k, :]
        return dx

    def parameters(self):
        return {f"{self.name}.K": self.K, f"{self.name}.b": self.b}

    def gradients(self):
        return {f"{self.name}.K": self.dK, f"{self.name}.b": self.db}


class MaxPool1d(Layer):
    """Windowed max over (N, L, C); ties route the gradient to the first max."""

    def __init__(self, name: str, window: int, stride: int):
        self.name = name
        self.window = window
        self.stride = stride
        self._argmax: np.ndarray | None = None
        self._in_shape: tuple[int, ...] = ()

    def out_length(self, in_len: int) -> int:
        return (in_len - self.window) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] < self.window:
            raise ValueError(
                f"{self.name}: input length {x.shape[1]} shorter than pool window {self.window}"
            )
        self._in_shape = x.shape
        windows = np.lib.stride_tricks.sliding_window_view(x, self.window, axis=1)
        windows = windows[:, :: self.stride]  # (N, n_out, C, w)
        self._argmax = windows.argmax(axis=3)
        return windows.max(axis=3)

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        n, n_out, c = d_out.shape
        dx = np.zeros(self._in_shape, dtype=np.float64)
        starts = np.arange(n_out) * self.stride
        pos = starts[None, :, None] + self._argmax  # (N, n_out, C)
        n_idx = np.arange(n)[:, None, None]
        c_idx = np.arange(c)[None, None, :]
        np.add.at(dx, (n_idx, pos, c_idx), d_out)
        return dx


class Flatten(Layer):
    """(N, L, C) -> (N, L*C)."""

    def __init__(self, name: str = "flatten"):
        self.name = name
        self._in_shape: tuple[int, ...] = ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        return d_out.reshape(self._in_shape)


class Embedding(Layer):
    """Token lookup plus learned positional table over (N, L) id arrays."""

    def __init__(self, name: str, vocab_size: int, max_len: int, d_model: int, rng: np.random.Generator):
        self.name = name
        self.tok = glorot(rng, (vocab_size, d_model), vocab_size, d_model)
        self.pos = glorot(rng, (max_len, d_model), max_len, d_model)
        self.dtok = np.zeros_like(self.tok)
        self.dpos = np.zeros_like(self.pos)
        self._ids: np.ndarray | None = None

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ValueError(f"{self.name}: expected (N, L) token ids, got shape {ids.shape}")
        self._ids = ids
        return self.tok[ids] + self.pos[None, : ids.shape[1]]

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        d_model = self.tok.shape[1]
        np.add.at(self.dtok, self._ids.ravel(), d_out.reshape(-1, d_model))
        self.dpos[: d_out.shape[1]] += d_out.sum(axis=0)
        return np.zeros_like(d_out)  # ids are not differentiable

    def parameters(self):
        return {f"{self.name}.tok": self.tok, f"{self.name}.pos": self.pos}

    def gradients(self):
        return {f"{self.name}.tok": self.dtok, f"{self.name}.pos": self.dpos}


class LayerNorm(Layer):
    """Normalization over the last axis with learned gain and shift."""

    EPS = 1e-5

    def __init__(self, name: str, dim: int):
        self.name = name
        self.g = np.ones(dim, dtype=np.float64)
        self.b = np.zeros(dim, dtype=np.float64)
        self.dg = np.zeros_like(self.g)
        self.db = np.zeros_like(self.b)
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mu) * inv_std
        self._xhat = xhat
        self._inv_std = inv_std
        return self.g * xhat + self.b

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        xhat = self._xhat
        d = xhat.shape[-1]
        lead = tuple(range(d_out.ndim - 1))
        self.dg += (d_out * xhat).sum(axis=lead)
        self.db += d_out.sum(axis=lead)
        dxhat = d_out * self.g
        # Standard layer-norm gradient with both mean terms folded in.
        term = dxhat - dxhat.mean(axis=-1, keepdims=True)
        term -= xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        return term * self._inv_std

    def parameters(self):
        return {f"{self.name}.g": self.g, f"{self.name}.b": self.b}

    def gradients(self):
        return {f"{self.name}.g": self.dg, f"{self.name}.b": self.db}


class MultiHeadSelfAttention(Layer):
    """Self-attention over (N, L, D) with h parallel subspace heads.

    Projections are bias-free: head_i = attention(x Wq_i, x Wk_i, x Wv_i),
    with the concatenated heads re-projected by Wo.
    """

    def __init__(self, name: str, d_model: int, heads: int, rng: np.random.Generator):
        if d_model % heads != 0:
            raise ValueError(f"d_model {d_model} is not divisible by {heads} heads")
        self.name = name
        self.heads = heads
        self.d_model = d_model
        self.d_k = d_model // heads
        self.Wq = glorot(rng, (d_model, d_model), d_model, d_model)
        self.Wk = glorot(rng, (d_model, d_model), d_model, d_model)
        self.Wv = glorot(rng, (d_model, d_model), d_model, d_model)
        self.Wo = glorot(rng, (d_model, d_model), d_model, d_model)
        self.dWq = np.zeros_like(self.Wq)
        self.dWk = np.zeros_like(self.Wk)
        self.dWv = np.zeros_like(self.Wv)
        self.dWo = np.zeros_like(self.Wo)
        self._cache: tuple | None = None

    def _split(self, x: np.ndarray) -> np.ndarray:
        n, length, _ = x.shape
        return x.reshape(n, length, self.heads, self.d_k).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        n, _, length, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(n, length, self.d_model)

    def forward(self, x: np.ndarray) -> np.ndarray:
        Q = self._split(x @ self.Wq)
        K = self._split(x @ self.Wk)
        V = self._split(x @ self.Wv)
        scores = Q @ np.swapaxes(K, -1, -2) / np.sqrt(self.d_k)
        A = softmax(scores, axis=-1)
        O = self._merge(A @ V)
        self._cache = (x, Q, K, V, O)
        return O @ self.Wo

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        x, Q, K, V, O = self._cache
        d = self.d_model
        d2 = d_out.reshape(-1, d)
        self.dWo += O.reshape(-1, d).T @ d2
        dO = self._split(d_out @ self.Wo.T)
        dQ, dK, dV = scaled_dot_attention_backward(Q, K, V, dO)
        dQm = self._merge(dQ).reshape(-1, d)
        dKm = self._merge(dK).reshape(-1, d)
        dVm = self._merge(dV).reshape(-1, d)
        x2 = x.reshape(-1, d)
        self.dWq += x2.T @ dQm
        self.dWk += x2.T @ dKm
        self.dWv += x2.T @ dVm
        dx = dQm @ self.Wq.T + dKm @ self.Wk.T + dVm @ self.Wv.T
        return dx.reshape(x.shape)

    def parameters(self):
        p = self.name
        return {f"{p}.Wq": self.Wq, f"{p}.Wk": self.Wk,
                f"{p}.Wv": self.Wv, f"{p}.Wo": self.Wo}

    def gradients(self):
        p = self.name
        return {f"{p}.Wq": self.dWq, f"{p}.Wk": self.dWk,
                f"{p}.Wv": self.dWv, f"{p}.Wo": self.dWo}


class EncoderBlock(Layer):
    """Post-norm encoder layer: attention and feed-forward, each wrapped in
    a residual addition followed by layer normalization."""

    def __init__(self, name: str, d_model: int, heads: int, ff_width: int, rng: np.random.Generator):
        self.name = name
        self.attn = MultiHeadSelfAttention(f"{name}.attn", d_model, heads, rng)
        self.ln1 = LayerNorm(f"{name}.ln1", d_model)
        self.ff1 = Dense(f"{name}.ff1", d_model, ff_width, "relu", rng)
        self.ff2 = Dense(f"{name}.ff2", ff_width, d_model, "none", rng)
        self.ln2 = LayerNorm(f"{name}.ln2", d_model)
        self._parts = (self.attn, self.ln1, self.ff1, self.ff2, self.ln2)

    def forward(self, x: np.ndarray) -> np.ndarray:
        a = self.ln1.forward(x + self.attn.forward(x))
        return self.ln2.forward(a + self.ff2.forward(self.ff1.forward(a)))

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        d_pre2 = self.ln2.backward(d_out)
        da = d_pre2 + self.ff1.backward(self.ff2.backward(d_pre2))
        d_pre1 = self.ln1.backward(da)
        return d_pre1 + self.attn.backward(d_pre1)

    def parameters(self):
        out: dict[str, np.ndarray] = {}
        for part in self._parts:
            out.update(part.parameters())
        return out

    def gradients(self):
        out: dict[str, np.ndarray] = {}
        for part in self._parts:
            out.update(part.gradients())
        return out


class SelectFirst(Layer):
    """(N, L, D) -> (N, D), keeping the position-0 pooling token."""

    def __init__(self, name: str = "pool0"):
        self.name = name
        self._in_shape: tuple[int, ...] = ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return x[:, 0, :]

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        dx = np.zeros(self._in_shape, dtype=np.float64)
        dx[:, 0, :] = d_out
        return dx


class Network:
    """An ordered stack of layers behaving as one layer."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            d_out = layer.backward(d_out)
        return d_out

    def parameters(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.parameters())
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.gradients())
        return out

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()
