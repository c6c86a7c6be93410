"""Mini-batch training, transfer learning and the CNN denoiser wrapper."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DimensionError, ParameterError
from ..synth import Dataset, add_noise_per_sample
from .layers import Dense, SoftmaxOutput, glorot_uniform
from .network import Network, prepare_images
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

NOISE_GRID = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 5
    noise_variances: tuple = NOISE_GRID
    max_samples_per_epoch: int | None = None
    max_val_samples: int | None = None
    restore_best: bool = True
    patch_size: int | None = None

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ParameterError("epochs, batch_size and lr must be positive")
        if self.patch_size is not None and self.patch_size < 1:
            raise ParameterError("patch_size must be positive")


def _normalise(net: Network, pix: np.ndarray) -> np.ndarray:
    """Pixel stack ``(N, h, w)`` to network units without the input-extent check."""
    off = float(net.meta.get("pixel_offset", 0.0))
    scale = float(net.meta.get("pixel_scale", 1.0))
    return ((np.asarray(pix, dtype=np.float64)[:, None] - off) / scale).astype(net.dtype)


def _frozen_prefix(net: Network) -> int:
    """Number of leading layers that are frozen/parameterless and dropout-free."""
    k = 0
    for i, layer in enumerate(net.layers):
        trainable = layer.params and not net.frozen[i]
        if trainable or getattr(layer, "dropout_rate", 0.0) > 0:
            break
        k = i + 1
    return min(k, len(net.layers) - 1)


def _features(net: Network, x: np.ndarray, stop: int, batch: int = 256) -> np.ndarray:
    outs = [net.forward(x[s : s + batch], stop=stop)[0] for s in range(0, len(x), batch)]
    return np.concatenate(outs)


def _random_patches(images: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    n, h, w = images.shape
    if size >= h and size >= w:
        return images
    size_h, size_w = min(size, h), min(size, w)
    top = rng.integers(0, h - size_h + 1, size=n)
    left = rng.integers(0, w - size_w + 1, size=n)
    return np.stack([im[t : t + size_h, l : l + size_w] for im, t, l in zip(images, top, left)])


def _accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(probs.argmax(axis=1) == labels)) if len(labels) else float("nan")


def fit(
    net: Network,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    denoise: bool = False,
) -> dict:
    """Train ``net`` in place on pixel images.

    For classifiers ``y`` holds integer labels. With ``denoise`` the targets
    are the clean pixel images and inputs are corrupted on the fly, one
    variance per sample drawn from ``cfg.noise_variances``, with a fresh
    noise stream every epoch; validation noise is fixed across epochs.
    """
    if len(x_train) == 0:
        raise DataError("empty training split")
    classify = net.loss == "categorical_cross_entropy"
    variances = np.asarray(cfg.noise_variances, dtype=np.float64)
    if cfg.patch_size is not None and not (denoise and net.fully_convolutional):
        raise ParameterError("patch training needs a fully convolutional denoiser")

    def make_inputs(pix, rng):
        if denoise:
            var = rng.choice(variances, size=len(pix))
            return _normalise(net, add_noise_per_sample(pix, var, rng)), _normalise(net, pix)
        return prepare_images(net, pix), None

    if cfg.max_val_samples is not None and len(x_val) > cfg.max_val_samples:
        pick = np.random.default_rng([cfg.seed, 0xA1]).choice(len(x_val), cfg.max_val_samples, replace=False)
        x_val, y_val = x_val[np.sort(pick)], y_val[np.sort(pick)]
    val_in, val_tgt = make_inputs(x_val, np.random.default_rng([cfg.seed, 0xBA1])) if len(x_val) else (None, None)
    if not denoise:
        val_tgt = y_val

    start = 0 if denoise else _frozen_prefix(net)
    train_feats = None
    if start > 0:
        train_feats = _features(net, prepare_images(net, x_train), start)
        if val_in is not None:
            val_in = _features(net, val_in, start)

    adam = AdamState(lr=cfg.lr)
    history = {"train_loss": [], "val_loss": []}
    if classify:
        history.update(train_acc=[], val_acc=[])
    best = (np.inf, None)
    since_best = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch, 0]).permutation(len(x_train))
        if cfg.max_samples_per_epoch:
            order = order[: cfg.max_samples_per_epoch]
        drop_rng = np.random.default_rng([cfg.seed, epoch, 1])
        noise_rng = np.random.default_rng([cfg.seed, epoch, 2])
        crop_rng = np.random.default_rng([cfg.seed, epoch, 3])
        tot_loss, tot_correct, seen = 0.0, 0, 0
        for s in range(0, len(order), cfg.batch_size):
            idx = np.sort(order[s : s + cfg.batch_size])
            if train_feats is not None:
                inp, tgt = train_feats[idx], y_train[idx]
            else:
                pix = x_train[idx]
                if cfg.patch_size is not None:
                    pix = _random_patches(pix, cfg.patch_size, crop_rng)
                inp, tgt = make_inputs(pix, noise_rng)
                if not denoise:
                    tgt = y_train[idx]
            out, tape = net.forward(inp, training=True, rng=drop_rng, start=start)
            loss, grads, _ = net.backward(tape, tgt, offset=start)
            params = net.parameters()
            flat = {(i, k): g for i, gd in grads.items() for k, g in gd.items() if (i, k) in params}
            adam_step(adam, params, flat)
            tot_loss += loss * len(idx)
            seen += len(idx)
            if classify:
                tot_correct += int(np.sum(out.argmax(axis=1) == tgt))
        history["train_loss"].append(tot_loss / seen)
        if classify:
            history["train_acc"].append(tot_correct / seen)
        if val_in is not None:
            vout = np.concatenate([net.forward(val_in[s : s + 256], start=start)[0] for s in range(0, len(val_in), 256)])
            vloss, _, _ = net.loss_and_delta(vout, val_tgt)
            history["val_loss"].append(vloss)
            if classify:
                history["val_acc"].append(_accuracy(vout, val_tgt))
            monitor = vloss
        else:
            monitor = history["train_loss"][-1]
        log.info(
            "epoch %d/%d loss %.5f val %.5f (%.1fs)",
            epoch + 1,
            cfg.epochs,
            history["train_loss"][-1],
            history["val_loss"][-1] if history["val_loss"] else float("nan"),
            time.perf_counter() - t0,
        )
        if monitor < best[0]:
            best = (monitor, {k: v.copy() for k, v in net.parameters().items()})
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    if cfg.restore_best and best[1] is not None:
        for (i, name), arr in best[1].items():
            net.layers[i].params[name][...] = arr
    history["epochs_run"] = len(history["train_loss"])
    return history


def _check_split(data: Dataset, name: str):
    x, y = data.split(name)
    if len(x) == 0 and name == "train":
        raise DataError(f"empty {name} split")
    return x, y


def train(net: Network, data: Dataset, cfg: TrainConfig) -> tuple[Network, dict]:
    if (1, data.window, data.window) != net.input_shape:
        raise DimensionError(f"dataset window {data.window} does not match network input {net.input_shape}")
    x_tr, y_tr = _check_split(data, "train")
    x_va, y_va = _check_split(data, "val")
    denoise = net.loss == "mse"
    if not denoise and net.n_classes != data.n_classes:
        raise DataError(f"network has {net.n_classes} outputs, dataset {data.n_classes} classes")
    if denoise:
        history = fit(net, x_tr, x_tr, x_va, x_va, cfg, denoise=True)
    else:
        history = fit(net, x_tr, y_tr, x_va, y_va, cfg)
    net.history = history
    return net, history


def _head_index(net: Network) -> int:
    if not isinstance(net.layers[-1], SoftmaxOutput) or not isinstance(net.layers[-2], Dense):
        raise DimensionError("transfer learning needs a dense layer followed by a softmax output")
    return len(net.layers) - 2


def widen_head(net: Network, classes_new: int, seed: int = 0) -> Network:
    """Copy ``net`` with a ``classes_new``-way head; old rows kept, new rows freshly drawn."""
    hi = _head_index(net)
    old = net.layers[hi]
    if classes_new <= old.n_out:
        raise DataError(f"new head must have more than {old.n_out} classes")
    new = net.copy()
    head = Dense(old.n_in, classes_new, old.activation, old.dropout_rate, rng=np.random.default_rng([seed, 0x7EAD]), dtype=old.params["w"].dtype)
    head.params["w"][: old.n_out] = old.params["w"]
    head.params["b"][: old.n_out] = old.params["b"]
    fresh = glorot_uniform(np.random.default_rng([seed, 0x7EAD, 1]), (classes_new - old.n_out, old.n_in), old.n_in, classes_new, old.params["w"].dtype)
    head.params["w"][old.n_out :] = fresh
    head.params["b"][old.n_out :] = 0
    layers = list(new.layers)
    layers[hi] = head
    layers[-1] = SoftmaxOutput(classes_new)
    out = Network(layers, new.input_shape, new.loss, new.seed, new.meta)
    out.frozen = [True] * len(layers)
    out.frozen[hi] = False
    return out


def transfer_learn(net: Network, new_data: Dataset, classes_new: int, cfg: TrainConfig) -> tuple[Network, dict]:
    """Freeze everything but a widened output head and retrain the head on ``new_data``."""
    if classes_new != net.n_classes + 1:
        raise DataError(f"expected {net.n_classes + 1} classes after transfer, got {classes_new}")
    if new_data.n_classes != classes_new:
        raise DataError(f"transfer data holds {new_data.n_classes} classes, expected {classes_new}")
    widened = widen_head(net, classes_new, cfg.seed)
    return train(widened, new_data, cfg)


def denoise_images(net: Network, noisy, batch_size: int = 32) -> np.ndarray:
    """Run a denoiser network on pixel images; output in pixel units clamped to [0, 255]."""
    noisy = np.asarray(noisy, dtype=np.float32)
    single = noisy.ndim == 2
    stack = noisy[None] if single else noisy
    x = prepare_images(net, stack)
    off = float(net.meta.get("pixel_offset", 0.0))
    scale = float(net.meta.get("pixel_scale", 1.0))
    outs = [net.forward(x[s : s + batch_size])[0] for s in range(0, len(x), batch_size)]
    y = np.concatenate(outs).reshape(stack.shape).astype(np.float64) * scale + off
    y = np.clip(y, 0.0, 255.0).astype(np.float32)
    return y[0] if single else y
