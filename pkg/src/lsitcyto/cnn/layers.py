"""Layer types for the from-scratch CNN.

Every layer exposes ``forward(x, training, rng) -> (out, cache)`` and
``backward(dout, cache, need_dx) -> (dx, grads)``. Parameters live in
``layer.params`` (a dict of arrays); layers without parameters keep it empty.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, ParameterError
from ..numerics import conv2d_backward, maxpool2d, maxpool2d_backward, pad_input, correlate_valid, softmax

ACTIVATIONS = ("relu", "linear")


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_activation(name: str) -> None:
    if name not in ACTIVATIONS:
        raise ParameterError(f"unknown activation {name!r}")


def _dropout(out, rate, training, rng):
    if not training or rate <= 0:
        return out, None
    if rng is None:
        raise ParameterError("dropout in training mode needs a random generator")
    keep = (rng.random(out.shape) >= rate).astype(out.dtype) / out.dtype.type(1.0 - rate)
    return out * keep, keep


class Layer:
    kind = "layer"
    params: dict

    def out_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def spec(self) -> list:
        return [self.kind]

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, c_in, c_out, k, padding="valid", activation="relu", dropout_rate=0.0, rng=None, dtype=np.float32):
        if k % 2 == 0:
            raise ParameterError(f"kernel size must be odd, got {k}")
        if padding not in ("valid", "same"):
            raise ParameterError(f"unknown padding {padding!r}")
        _check_activation(activation)
        if not 0 <= dropout_rate < 1:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        self.c_in, self.c_out, self.k = int(c_in), int(c_out), int(k)
        self.padding, self.activation, self.dropout_rate = padding, activation, float(dropout_rate)
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = c_in * k * k
        if activation == "relu":
            w = he_uniform(rng, (c_out, c_in, k, k), fan_in, dtype)
        else:
            w = glorot_uniform(rng, (c_out, c_in, k, k), fan_in, c_out * k * k, dtype)
        self.params = {"w": w, "b": np.zeros(c_out, dtype=dtype)}

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.c_in:
            raise DimensionError(f"conv expects {self.c_in} channels, got {c}")
        if self.padding == "same":
            return (self.c_out, h, w)
        if h < self.k or w < self.k:
            raise DimensionError(f"{self.k}x{self.k} kernel does not fit a {h}x{w} input")
        return (self.c_out, h - self.k + 1, w - self.k + 1)

    def spec(self):
        return [self.kind, self.c_in, self.c_out, self.k, self.padding, self.activation, self.dropout_rate]

    def forward(self, x, training=False, rng=None):
        w, b = self.params["w"], self.params["b"]
        xp = pad_input(x, self.k, self.k, self.padding)
        z = correlate_valid(xp, w)
        z += b.reshape(1, -1, 1, 1)
        a = np.maximum(z, 0) if self.activation == "relu" else z
        out, keep = _dropout(a, self.dropout_rate, training, rng)
        return out, (xp, a, keep)

    def backward(self, dout, cache, need_dx=True):
        xp, a, keep = cache
        if keep is not None:
            dout = dout * keep
        dz = dout * (a > 0) if self.activation == "relu" else dout
        dx, dw, db = conv2d_backward(xp, self.params["w"], dz, self.padding, need_dx)
        return dx, {"w": dw, "b": db}


class MaxPool2D(Layer):
    kind = "maxpool"

    def __init__(self, k):
        if k <= 0:
            raise ParameterError("pool size must be positive")
        self.k = int(k)
        self.params = {}

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if h < self.k or w < self.k:
            raise DimensionError(f"pool {self.k} does not fit {h}x{w}")
        return (c, h // self.k, w // self.k)

    def spec(self):
        return [self.kind, self.k]

    def forward(self, x, training=False, rng=None):
        out, mask = maxpool2d(x, self.k)
        return out, (mask, x.shape)

    def backward(self, dout, cache, need_dx=True):
        mask, shape = cache
        return maxpool2d_backward(dout, mask, shape), {}


class Flatten(Layer):
    kind = "flatten"

    def __init__(self):
        self.params = {}

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache, need_dx=True):
        return dout.reshape(cache), {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out, activation="relu", dropout_rate=0.0, rng=None, dtype=np.float32):
        _check_activation(activation)
        if not 0 <= dropout_rate < 1:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.activation, self.dropout_rate = activation, float(dropout_rate)
        rng = rng if rng is not None else np.random.default_rng(0)
        if activation == "relu":
            w = he_uniform(rng, (n_out, n_in), n_in, dtype)
        else:
            w = glorot_uniform(rng, (n_out, n_in), n_in, n_out, dtype)
        self.params = {"w": w, "b": np.zeros(n_out, dtype=dtype)}

    def out_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise DimensionError(f"dense expects ({self.n_in},), got {in_shape}")
        return (self.n_out,)

    def spec(self):
        return [self.kind, self.n_in, self.n_out, self.activation, self.dropout_rate]

    def forward(self, x, training=False, rng=None):
        z = x @ self.params["w"].T + self.params["b"]
        a = np.maximum(z, 0) if self.activation == "relu" else z
        out, keep = _dropout(a, self.dropout_rate, training, rng)
        return out, (x, a, keep)

    def backward(self, dout, cache, need_dx=True):
        x, a, keep = cache
        if keep is not None:
            dout = dout * keep
        dz = dout * (a > 0) if self.activation == "relu" else dout
        grads = {"w": dz.T @ x, "b": dz.sum(axis=0)}
        return (dz @ self.params["w"] if need_dx else None), grads


class SoftmaxOutput(Layer):
    """Terminal softmax. Its backward is the softmax Jacobian-vector product;
    with cross-entropy the network short-cuts to ``p - onehot`` instead."""

    kind = "softmax"

    def __init__(self, classes):
        self.classes = int(classes)
        self.params = {}

    def out_shape(self, in_shape):
        if in_shape != (self.classes,):
            raise DimensionError(f"softmax expects ({self.classes},), got {in_shape}")
        return in_shape

    def spec(self):
        return [self.kind, self.classes]

    def forward(self, x, training=False, rng=None):
        p = softmax(x)
        return p, p

    def backward(self, dout, cache, need_dx=True):
        p = cache
        return p * (dout - (dout * p).sum(axis=-1, keepdims=True)), {}


def layer_from_spec(spec: list, rng=None, dtype=np.float32) -> Layer:
    kind = spec[0]
    if kind == "conv":
        return Conv2D(int(spec[1]), int(spec[2]), int(spec[3]), spec[4], spec[5], float(spec[6]), rng=rng, dtype=dtype)
    if kind == "maxpool":
        return MaxPool2D(int(spec[1]))
    if kind == "flatten":
        return Flatten()
    if kind == "dense":
        return Dense(int(spec[1]), int(spec[2]), spec[3], float(spec[4]), rng=rng, dtype=dtype)
    if kind == "softmax":
        return SoftmaxOutput(int(spec[1]))
    raise ParameterError(f"unknown layer kind {kind!r}")
