"""Layers with explicit forward/backward passes.

Every layer follows the same protocol::

    y, cache = layer.forward(x)
    gx, grads = layer.backward(cache, gy)

``grads`` is a list aligned with ``layer.params``. Forward passes never mutate
the layer; everything needed for the backward pass lives in ``cache``.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


class Layer:
    params: list[np.ndarray]
    names: tuple[str, ...] = ()

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, gy):
        raise NotImplementedError

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def astype(self, dtype) -> "Layer":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.params = [p.astype(dtype) for p in self.params]
        return clone


class Dense(Layer):
    names = ("W", "b")

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None,
                 scale: float = 1.0, dtype=np.float32):
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = scale / np.sqrt(n_in)
        W = rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype)
        b = rng.uniform(-bound, bound, size=n_out).astype(dtype)
        self.params = [W, b]

    @property
    def n_in(self) -> int:
        return self.params[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.params[0].shape[1]

    def forward(self, x):
        W, b = self.params
        return x @ W + b, x

    def backward(self, x, gy):
        W, _ = self.params
        return gy @ W.T, [x.T @ gy, gy.sum(axis=0)]

    def out_shape(self, in_shape):
        return (self.n_out,)


class ReLU(Layer):
    def __init__(self):
        self.params = []

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, mask, gy):
        return gy * mask, []


class Tanh(Layer):
    def __init__(self):
        self.params = []

    def forward(self, x):
        y = np.tanh(x)
        return y, y

    def backward(self, y, gy):
        return gy * (1.0 - y * y), []


class Flatten(Layer):
    def __init__(self):
        self.params = []

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, shape, gy):
        return gy.reshape(shape), []

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


class Conv2D(Layer):
    """Valid (unpadded) 2D convolution over (N, C, H, W) inputs, computed by im2col."""
    names = ("W", "b")

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int = 1,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if min(c_in, c_out, kernel, stride) < 1:
            raise ValueError("conv dimensions must be >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = c_in * kernel * kernel
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(c_out, c_in, kernel, kernel)).astype(dtype)
        b = rng.uniform(-bound, bound, size=c_out).astype(dtype)
        self.params = [W, b]
        self.stride = stride

    @property
    def kernel(self) -> int:
        return self.params[0].shape[2]

    def out_shape(self, in_shape):
        c, h, w = in_shape
        k, s = self.kernel, self.stride
        if h < k or w < k:
            raise ShapeMismatch(f"input {in_shape} smaller than kernel {k}")
        return (self.params[0].shape[0], (h - k) // s + 1, (w - k) // s + 1)

    def _cols(self, x):
        k, s = self.kernel, self.stride
        win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        # (N, C, Ho, Wo, k, k) -> (N, Ho, Wo, C*k*k)
        n, c, ho, wo = win.shape[:4]
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho, wo, c * k * k)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.params[0].shape[1]:
            raise ShapeMismatch(f"conv expects (N, {self.params[0].shape[1]}, H, W), got {x.shape}")
        W, b = self.params
        cols = self._cols(x)
        y = cols @ W.reshape(W.shape[0], -1).T + b
        return y.transpose(0, 3, 1, 2), (x.shape, cols)

    def backward(self, cache, gy):
        x_shape, cols = cache
        W, _ = self.params
        c_out, c_in, k, _ = W.shape
        s = self.stride
        g = gy.transpose(0, 2, 3, 1)  # (N, Ho, Wo, F)
        gW = np.tensordot(g, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(W.shape)
        gb = g.sum(axis=(0, 1, 2))
        gcols = (g @ W.reshape(c_out, -1)).reshape(*g.shape[:3], c_in, k, k)
        gx = np.zeros(x_shape, dtype=gy.dtype)
        ho, wo = g.shape[1], g.shape[2]
        for i in range(k):
            for j in range(k):
                gx[:, :, i:i + s * ho:s, j:j + s * wo:s] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gx, [gW, gb]
