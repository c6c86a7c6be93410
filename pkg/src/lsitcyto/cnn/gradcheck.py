"""Central finite-difference check of analytic network gradients."""

from __future__ import annotations

import numpy as np

from .layers import Conv2D, Dense, Flatten, MaxPool2D, SoftmaxOutput
from .network import Network


def _loss(net: Network, x, target, dropout_seed: int | None) -> float:
    rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    out, _ = net.forward(x, training=dropout_seed is not None, rng=rng)
    return net.loss_and_delta(out, target)[0]


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``||a - b|| / max(||a||, ||b||)``, 0 when both vanish."""
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / den) if den > 0 else 0.0


def check_gradients(net: Network, x, target, h: float = 1e-6, dropout_seed: int | None = None) -> dict:
    """Compare backprop with central differences on a float64 shadow copy.

    Dropout layers see the same mask in every evaluation when
    ``dropout_seed`` is given. Returns ``{(layer, param): relative error}``
    plus ``("input", "x")`` for the input gradient.
    """
    shadow = net.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    _, tape = shadow.forward(x, training=dropout_seed is not None, rng=rng)
    _, grads, dx = shadow.backward(tape, target, need_input_grad=True)
    report = {}
    for (i, name), p in shadow.parameters().items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + h
            up = _loss(shadow, x, target, dropout_seed)
            p[idx] = keep - h
            down = _loss(shadow, x, target, dropout_seed)
            p[idx] = keep
            num[idx] = (up - down) / (2 * h)
        report[(i, name)] = relative_error(grads[i][name], num)
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        keep = x[idx]
        x[idx] = keep + h
        up = _loss(shadow, x, target, dropout_seed)
        x[idx] = keep - h
        down = _loss(shadow, x, target, dropout_seed)
        x[idx] = keep
        num[idx] = (up - down) / (2 * h)
    report[("input", "x")] = relative_error(dx, num)
    return report


def toy_network(rng: np.random.Generator, size: int = 12, classes: int = 3, dropout: float = 0.0) -> Network:
    """Small randomised classifier touching every layer type."""
    c1 = int(rng.integers(2, 4))
    c2 = int(rng.integers(2, 4))
    k1 = int(rng.choice([3, 5]))
    pad2 = str(rng.choice(["valid", "same"]))
    layers = [
        Conv2D(1, c1, k1, "valid", "relu", rng=rng, dtype=np.float64),
        MaxPool2D(2),
        Conv2D(c1, c2, 3, pad2, str(rng.choice(["relu", "linear"])), rng=rng, dtype=np.float64),
        Flatten(),
    ]
    net = Network(layers, (1, size, size), "mse")
    flat = net.shapes[-1][0]
    hidden = int(rng.integers(4, 9))
    layers += [
        Dense(flat, hidden, "relu", dropout_rate=dropout, rng=rng, dtype=np.float64),
        Dense(hidden, classes, "linear", rng=rng, dtype=np.float64),
        SoftmaxOutput(classes),
    ]
    for layer in layers:
        for p in layer.params.values():
            p += rng.uniform(-0.1, 0.1, p.shape)  # non-zero biases exercise their gradients
    return Network(layers, (1, size, size), "categorical_cross_entropy")


def toy_denoiser(rng: np.random.Generator, size: int = 8) -> Network:
    layers = [
        Conv2D(1, 3, 3, "same", "relu", rng=rng, dtype=np.float64),
        Conv2D(3, 2, 5, "same", "relu", rng=rng, dtype=np.float64),
        Conv2D(2, 1, 1, "same", "linear", rng=rng, dtype=np.float64),
    ]
    for layer in layers:
        layer.params["b"] += rng.uniform(-0.1, 0.1, layer.params["b"].shape)
    return Network(layers, (1, size, size), "mse")
