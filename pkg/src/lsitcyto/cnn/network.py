"""Network container, canonical architectures and checkpoints."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensorio
from ..errors import DataError, DimensionError, StateError
from .layers import Conv2D, Dense, Flatten, Layer, MaxPool2D, SoftmaxOutput, layer_from_spec

LOSSES = ("mse", "categorical_cross_entropy")


@dataclass
class Tape:
    """Per-layer caches and outputs recorded by a forward pass."""

    inputs: list
    caches: list
    training: bool

    @property
    def output(self):
        return self.inputs[-1]


class Network:
    def __init__(self, layers: list[Layer], input_shape: tuple, loss: str, seed: int = 0, meta: dict | None = None):
        if loss not in LOSSES:
            raise DataError(f"unknown loss {loss!r}")
        self.layers = list(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.loss = loss
        self.seed = int(seed)
        self.frozen = [False] * len(self.layers)
        self.meta = dict(meta or {})
        self.history: dict = {}
        self.shapes = self._check_shapes()
        if loss == "categorical_cross_entropy" and not isinstance(self.layers[-1], SoftmaxOutput):
            raise DimensionError("cross-entropy networks must end in a softmax output layer")
        if sum(isinstance(l, SoftmaxOutput) for l in self.layers) > 1:
            raise DimensionError("only one terminal output layer is allowed")

    def _check_shapes(self) -> list[tuple]:
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    # -- structure -------------------------------------------------------

    @property
    def n_classes(self) -> int:
        return self.shapes[-1][0]

    def n_params(self) -> int:
        return sum(l.n_params() for l in self.layers)

    def parameters(self, trainable_only: bool = True) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            if trainable_only and self.frozen[i]:
                continue
            for name, arr in layer.params.items():
                out[(i, name)] = arr
        return out

    def freeze(self, indices) -> None:
        for i in indices:
            self.frozen[i] = True

    def astype(self, dtype) -> "Network":
        clone = copy.deepcopy(self)
        for layer in clone.layers:
            for name in layer.params:
                layer.params[name] = layer.params[name].astype(dtype)
        return clone

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    @property
    def dtype(self):
        for layer in self.layers:
            for arr in layer.params.values():
                return arr.dtype
        return np.dtype(np.float32)

    def last_conv_index(self) -> int | None:
        idx = [i for i, l in enumerate(self.layers) if isinstance(l, Conv2D)]
        return idx[-1] if idx else None

    # -- passes ------------------------------------------------------------

    @property
    def fully_convolutional(self) -> bool:
        return all(isinstance(l, Conv2D) and l.padding == "same" for l in self.layers)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[1:] == self.input_shape:
            return x
        if x.shape == self.input_shape:
            return x[None]
        # same-padded conv stacks accept any spatial extent (used for patch training)
        if self.fully_convolutional and x.ndim == 4 and x.shape[1] == self.input_shape[0]:
            return x
        raise DimensionError(f"input shape {x.shape} does not match network input {self.input_shape}")

    def forward(self, x, training: bool = False, rng=None, start: int = 0, stop: int | None = None):
        """Run layers ``start:stop``; returns ``(output, tape)``."""
        stop = len(self.layers) if stop is None else stop
        if start == 0:
            x = self._check_input(x)
        x = x.astype(self.dtype, copy=False)
        inputs, caches = [x], []
        for layer in self.layers[start:stop]:
            x, cache = layer.forward(x, training, rng)
            inputs.append(x)
            caches.append(cache)
        return x, Tape(inputs, caches, training)

    def loss_and_delta(self, output, target) -> tuple[float, np.ndarray, np.ndarray | None]:
        """Loss value plus the delta to feed backward.

        Cross-entropy returns the delta at the logits (``(p - onehot) / N``)
        together with the index marking that the softmax layer is skipped.
        """
        n = output.shape[0]
        if self.loss == "categorical_cross_entropy":
            t = np.asarray(target)
            if t.ndim == 1:
                onehot = np.zeros_like(output)
                onehot[np.arange(n), t.astype(np.int64)] = 1
            else:
                onehot = t.astype(output.dtype)
            p = output.astype(np.float64)
            loss = float(-np.sum(onehot * np.log(np.clip(p, 1e-12, None))) / n)
            return loss, ((output - onehot) / n).astype(output.dtype), len(self.layers) - 1
        t = np.asarray(target, dtype=output.dtype).reshape(output.shape)
        diff = output - t
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        return loss, (2.0 / diff.size) * diff, None

    def backprop(self, tape: Tape, delta, top: int, bottom: int = 0, need_input_grad: bool = False, offset: int = 0):
        """Push ``delta`` (gradient at the output of layer ``top - 1``) down to layer ``bottom``.

        ``offset`` is the index of the tape's first layer within ``self.layers``.
        Returns ``(grads, dx)``; frozen layers yield an empty grads entry.
        """
        grads: dict[int, dict] = {}
        for i in range(top - 1, bottom - 1, -1):
            layer = self.layers[i]
            cache = tape.caches[i - offset]
            need_dx = i > bottom or need_input_grad
            delta, g = layer.backward(delta, cache, need_dx)
            grads[i] = {} if self.frozen[i] else g
        return grads, delta

    def backward(self, tape: Tape | None, target, need_input_grad: bool = False, offset: int = 0):
        """Gradients of the loss w.r.t. every unfrozen parameter.

        Returns ``(loss, grads, dx)`` where ``grads`` maps layer index to a
        dict of parameter gradients (empty for frozen/parameterless layers).
        """
        if tape is None or not tape.caches:
            raise StateError("backward needs the tape of a forward pass")
        loss, delta, skip = self.loss_and_delta(tape.output, target)
        top = skip if skip is not None else len(self.layers)
        first_trainable = min((i for i in range(len(self.layers)) if not self.frozen[i] and self.layers[i].params), default=top)
        bottom = offset if need_input_grad else max(first_trainable, offset)
        grads, dx = self.backprop(tape, delta, top, bottom, need_input_grad, offset)
        for i in range(len(self.layers)):
            grads.setdefault(i, {})
        return loss, grads, dx

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        x = self._check_input(x)
        outs = [self.forward(x[s : s + batch_size])[0] for s in range(0, len(x), batch_size)]
        return np.concatenate(outs) if outs else np.empty((0, *self.shapes[-1]))

    def predict(self, x, batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
        p = self.predict_proba(x, batch_size)
        return p.argmax(axis=-1), p


def prepare_images(net: Network, images) -> np.ndarray:
    """Map pixel images ``(s, s)`` / ``(N, s, s)`` / ``(N, 1, s, s)`` to normalised network input."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 3:
        x = x[:, None]
    if x.shape[1:] != net.input_shape:
        raise DimensionError(f"images of shape {x.shape[1:]} do not fit network input {net.input_shape}")
    off = float(net.meta.get("pixel_offset", 0.0))
    scale = float(net.meta.get("pixel_scale", 1.0))
    return ((x - off) / scale).astype(net.dtype)


def predict(net: Network, images) -> tuple:
    """Class index (ties to the lowest index) and probability vector(s) for pixel images."""
    single = np.asarray(images).ndim == 2
    idx, p = net.predict(prepare_images(net, images))
    return (int(idx[0]), p[0]) if single else (idx, p)


# ---------------------------------------------------------------------------
# architectures


def build_classifier(input_size: int = 50, classes: int = 6, seed: int = 0) -> Network:
    """Conv64/3 -> Conv32/3 -> Pool3 -> Conv16/3 -> Pool3 -> Flatten -> FC128 -> FC64 -> FC classes -> softmax."""
    rng = np.random.default_rng(seed)
    layers = [
        Conv2D(1, 64, 3, "valid", "relu", rng=rng),
        Conv2D(64, 32, 3, "valid", "relu", rng=rng),
        MaxPool2D(3),
        Conv2D(32, 16, 3, "valid", "relu", rng=rng),
        MaxPool2D(3),
        Flatten(),
    ]
    try:
        shape = (1, input_size, input_size)
        for layer in layers:
            shape = layer.out_shape(shape)
    except DimensionError as exc:
        raise DimensionError(f"input {input_size} too small for the classifier stack: {exc}") from exc
    flat = shape[0]
    layers += [
        Dense(flat, 128, "relu", rng=rng),
        Dense(128, 64, "relu", rng=rng),
        Dense(64, classes, "linear", rng=rng),
        SoftmaxOutput(classes),
    ]
    return Network(layers, (1, input_size, input_size), "categorical_cross_entropy", seed, meta={"arch": "classifier", "pixel_offset": 0.0, "pixel_scale": 255.0})


DENOISER_KERNELS = (3, 3, 5, 5, 7, 7)


def build_denoiser(input_size: int = 50, seed: int = 0, filters: int = 32, kernels=DENOISER_KERNELS) -> Network:
    """Same-padded conv stack (32 filters each, relu) closed by a linear 1x1 single-filter head."""
    if input_size < 1:
        raise DimensionError("input size must be positive")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    c_in = 1
    for k in kernels:
        layers.append(Conv2D(c_in, filters, k, "same", "relu", rng=rng))
        c_in = filters
    layers.append(Conv2D(c_in, 1, 1, "same", "linear", rng=rng))
    return Network(layers, (1, input_size, input_size), "mse", seed, meta={"arch": "denoiser", "pixel_offset": 128.0, "pixel_scale": 128.0})


def build_fc_denoiser(input_size: int = 50, hidden=(512, 256, 512), seed: int = 0) -> Network:
    """Fully connected autoencoder baseline operating on vectorised images."""
    rng = np.random.default_rng(seed)
    d = input_size * input_size
    layers: list[Layer] = [Flatten()]
    n_in = d
    for h in hidden:
        layers.append(Dense(n_in, h, "relu", rng=rng))
        n_in = h
    layers.append(Dense(n_in, d, "relu", rng=rng))
    return Network(layers, (1, input_size, input_size), "mse", seed, meta={"arch": "fc_denoiser", "pixel_offset": 0.0, "pixel_scale": 255.0})


def build_deep_classifier(input_size: int = 66, classes: int = 6, seed: int = 0) -> Network:
    """Deep variant from the depth sweep (512-kernel first layer, dropouts 0.5/0.2).

    Only composes for large inputs; used for depth experiments, not as the
    default classifier.
    """
    rng = np.random.default_rng(seed)
    spec = [
        Conv2D(1, 512, 3, "same", "relu", rng=rng),
        MaxPool2D(3),
        Conv2D(512, 128, 3, "same", "relu", 0.5, rng=rng),
        MaxPool2D(2),
        Conv2D(128, 64, 3, "same", "relu", 0.2, rng=rng),
        MaxPool2D(2),
        Conv2D(64, 32, 3, "same", "relu", 0.2, rng=rng),
        MaxPool2D(3),
        Conv2D(32, 16, 3, "same", "relu", rng=rng),
        Conv2D(16, 8, 3, "same", "relu", rng=rng),
        Flatten(),
    ]
    shape = (1, input_size, input_size)
    for layer in spec:
        shape = layer.out_shape(shape)
    spec += [
        Dense(shape[0], 256, "relu", rng=rng),
        Dense(256, 128, "relu", 0.2, rng=rng),
        Dense(128, classes, "linear", rng=rng),
        SoftmaxOutput(classes),
    ]
    return Network(spec, (1, input_size, input_size), "categorical_cross_entropy", seed, meta={"arch": "deep_classifier", "pixel_offset": 0.0, "pixel_scale": 255.0})


ARCHITECTURES = {
    "classifier": build_classifier,
    "denoiser": build_denoiser,
    "fc_denoiser": build_fc_denoiser,
    "deep_classifier": build_deep_classifier,
}


# ---------------------------------------------------------------------------
# checkpoints


def save_network(net: Network, directory) -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    items = {
        "format": "lsitcyto-network-1",
        "input_shape": list(net.input_shape),
        "loss": net.loss,
        "seed": net.seed,
        "n_layers": len(net.layers),
        "frozen": [int(f) for f in net.frozen],
    }
    for i, layer in enumerate(net.layers):
        items[f"layer.{i}"] = layer.spec()
        for name, arr in layer.params.items():
            p = root / f"param_{i:02d}_{name}.dlt"
            tensorio.save_tensor(p, arr)
            paths.append(p)
    for k, v in net.meta.items():
        items[f"meta.{k}"] = v
    if net.history:
        items["history"] = json.dumps(net.history, sort_keys=True, separators=(",", ":"))
    mp = root / "manifest.txt"
    tensorio.write_manifest(mp, items)
    paths.append(mp)
    return paths


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_network(directory) -> Network:
    root = Path(directory)
    mp = root / "manifest.txt"
    if not mp.exists():
        raise DataError(f"no network manifest in {root}")
    meta = tensorio.read_manifest(mp)
    if meta.get("format") != "lsitcyto-network-1":
        raise DataError(f"{root} is not a network checkpoint")
    layers = []
    for i in range(int(meta["n_layers"])):
        spec = meta[f"layer.{i}"].split(",")
        layer = layer_from_spec(spec)
        for name in layer.params:
            layer.params[name] = tensorio.load_tensor(root / f"param_{i:02d}_{name}.dlt")
        layers.append(layer)
    extra = {k[5:]: _parse_scalar(v) for k, v in meta.items() if k.startswith("meta.")}
    net = Network(layers, tuple(int(v) for v in meta["input_shape"].split(",")), meta["loss"], int(meta["seed"]), extra)
    net.frozen = [bool(int(v)) for v in meta["frozen"].split(",")]
    if "history" in meta:
        net.history = json.loads(meta["history"])
    return net
