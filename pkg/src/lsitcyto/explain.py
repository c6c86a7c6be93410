"""Explainability maps for trained classifiers: Grad-CAM and gradient saliency.

Both take one pixel image ``(s, s)`` and a class index and return an
``(s, s)`` float64 map normalised to [0, 1] (all zeros when the gradient
vanishes everywhere).
"""

from __future__ import annotations

import numpy as np

from .cnn.layers import SoftmaxOutput
from .cnn.network import Network, prepare_images
from .errors import DimensionError, StructureError
from .numerics import resize_bilinear


def _normalise(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    top = m.max() if m.size else 0.0
    return m / top if top > 0 else np.zeros_like(m)


def _logit_delta(net: Network, tape, class_idx: int):
    """One-hot seed at the logits plus the index of the layer that produces them."""
    if not isinstance(net.layers[-1], SoftmaxOutput):
        raise StructureError("explanations need a classifier ending in a softmax layer")
    n_classes = net.n_classes
    if not 0 <= class_idx < n_classes:
        raise DimensionError(f"class index {class_idx} outside 0..{n_classes - 1}")
    top = len(net.layers) - 1
    logits = tape.inputs[top]
    delta = np.zeros_like(logits)
    delta[:, class_idx] = 1.0
    return delta, top


def grad_cam(net: Network, image, class_idx: int) -> np.ndarray:
    """Class-discriminative heat map from the last conv layer.

    Channel weights are the spatially averaged gradients of the class logit
    with respect to that layer's activations; the weighted activation sum is
    rectified, bilinearly resized to the input extent and scaled to [0, 1].
    """
    last = net.last_conv_index()
    if last is None:
        raise StructureError("network has no convolutional layer")
    x = prepare_images(net, image)
    if x.shape[0] != 1:
        raise DimensionError("grad_cam explains one image at a time")
    _, tape = net.forward(x)
    delta, top = _logit_delta(net, tape, class_idx)
    _, dact = net.backprop(tape, delta, top, bottom=last + 1, need_input_grad=True)
    act = tape.inputs[last + 1][0].astype(np.float64)  # (C, h, w)
    weights = dact[0].astype(np.float64).mean(axis=(1, 2))
    cam = np.maximum(np.tensordot(weights, act, axes=1), 0.0)
    s_h, s_w = net.input_shape[1:]
    if cam.shape != (s_h, s_w):
        cam = resize_bilinear(cam, s_h, s_w)
    return _normalise(np.maximum(cam, 0.0))


def saliency(net: Network, image, class_idx: int) -> np.ndarray:
    """Absolute gradient of the class logit with respect to the input pixels, scaled to [0, 1]."""
    x = prepare_images(net, image)
    if x.shape[0] != 1:
        raise DimensionError("saliency explains one image at a time")
    _, tape = net.forward(x)
    delta, top = _logit_delta(net, tape, class_idx)
    _, dx = net.backprop(tape, delta, top, bottom=0, need_input_grad=True)
    return _normalise(np.abs(dx[0, 0]))


def support_mask(window: int, radius: float, center: tuple[float, float] | None = None) -> np.ndarray:
    """Boolean disc of ``radius`` pixels around the window centre."""
    cy, cx = ((window - 1) / 2.0, (window - 1) / 2.0) if center is None else center
    yy, xx = np.mgrid[0:window, 0:window]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius


def mass_fraction(m: np.ndarray, mask: np.ndarray) -> float:
    """Share of a non-negative map's total mass that falls inside ``mask`` (0 for an empty map)."""
    total = float(np.sum(m))
    return float(np.sum(m[mask])) / total if total > 0 else 0.0


def peak_in_mask(m: np.ndarray, mask: np.ndarray) -> bool:
    """Whether the map's maximum (first in raster order on ties) lies inside ``mask``."""
    return bool(mask.flat[int(np.argmax(m))])
