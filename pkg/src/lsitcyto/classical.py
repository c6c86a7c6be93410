"""Classical baseline denoisers: Gaussian, average, median and bilateral filters.

All filters replicate the border pixels and compute and return float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import njit, pick
from .errors import DimensionError, ParameterError

FILTER_KINDS = ("gaussian", "average", "median", "bilateral")


def _check_kernel(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ParameterError(f"kernel size must be a positive odd int, got {k!r}")


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    kernel: int = 3
    sigma_spatial: float | None = None
    sigma_color: float = 3.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ParameterError(f"unknown filter kind {self.kind!r}")
        _check_kernel(self.kernel)
        if self.sigma_spatial is not None and self.sigma_spatial <= 0:
            raise ParameterError("sigma_spatial must be positive")
        if self.sigma_color <= 0:
            raise ParameterError("sigma_color must be positive")


# bilateral defaults: kernel 3, sigmaColor 3, sigmaSpace 3
DEFAULT_FILTERS = {
    "gaussian": FilterSpec("gaussian", 3),
    "average": FilterSpec("average", 3),
    "median": FilterSpec("median", 3),
    "bilateral": FilterSpec("bilateral", 3, sigma_spatial=3.0, sigma_color=3.0),
}


def _check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {img.shape}")
    return img


def default_sigma(k: int) -> float:
    """Sigma used when none is given: 0.3 * ((k - 1) / 2 - 1) + 0.8 (0.8 for k = 3)."""
    return 0.3 * ((k - 1) * 0.5 - 1) + 0.8


def gaussian_kernel1d(k: int, sigma: float | None = None) -> np.ndarray:
    _check_kernel(k)
    if sigma is None:
        sigma = default_sigma(k)
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2
    g = np.exp(-(x**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _separable(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    r = len(taps) // 2
    padded = np.pad(img, r, mode="edge")
    rows = sum(taps[i] * padded[i : i + img.shape[0], :] for i in range(len(taps)))
    return sum(taps[j] * rows[:, j : j + img.shape[1]] for j in range(len(taps)))


def gaussian_filter(img, k: int = 3, sigma: float | None = None) -> np.ndarray:
    img = _check_image(img)
    return _separable(img, gaussian_kernel1d(k, sigma))


def average_filter(img, k: int = 3) -> np.ndarray:
    img = _check_image(img)
    _check_kernel(k)
    return _separable(img, np.full(k, 1.0 / k))


@njit
def _median_loops(padded, k, h, w):
    out = np.empty((h, w), dtype=np.float64)
    buf = np.empty(k * k, dtype=np.float64)
    mid = (k * k) // 2
    for i in range(h):
        for j in range(w):
            n = 0
            for u in range(k):
                for v in range(k):
                    buf[n] = padded[i + u, j + v]
                    n += 1
            buf.sort()
            out[i, j] = buf[mid]
    return out


def _median_numpy(padded, k, h, w):
    win = sliding_window_view(padded, (k, k)).reshape(h, w, k * k)
    return np.median(win, axis=-1)


_median_impl = pick(_median_loops, _median_numpy)


def median_filter(img, k: int = 3) -> np.ndarray:
    """Median of the replicated-border ``k x k`` neighbourhood (odd k, so the middle order statistic)."""
    img = _check_image(img)
    _check_kernel(k)
    r = k // 2
    padded = np.ascontiguousarray(np.pad(img, r, mode="edge"))
    return _median_impl(padded, k, img.shape[0], img.shape[1])


@njit
def _bilateral_loops(padded, k, h, w, space_w, inv2c):
    out = np.empty((h, w), dtype=np.float64)
    r = k // 2
    for i in range(h):
        for j in range(w):
            centre = padded[i + r, j + r]
            num = 0.0
            den = 0.0
            for u in range(k):
                for v in range(k):
                    val = padded[i + u, j + v]
                    d = val - centre
                    wt = space_w[u, v] * np.exp(-d * d * inv2c)
                    num += wt * val
                    den += wt
            out[i, j] = num / den
    return out


def _bilateral_numpy(padded, k, h, w, space_w, inv2c):
    r = k // 2
    centre = padded[r : r + h, r : r + w]
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    for u in range(k):
        for v in range(k):
            val = padded[u : u + h, v : v + w]
            d = val - centre
            wt = space_w[u, v] * np.exp(-d * d * inv2c)
            num += wt * val
            den += wt
    return num / den


_bilateral_impl = pick(_bilateral_loops, _bilateral_numpy)


def bilateral_weights_space(k: int, sigma_space: float) -> np.ndarray:
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2
    d2 = x[:, None] ** 2 + x[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma_space * sigma_space))


def bilateral_filter(img, k: int = 3, sigma_color: float = 3.0, sigma_space: float = 3.0) -> np.ndarray:
    img = _check_image(img)
    _check_kernel(k)
    if not (sigma_color > 0 and sigma_space > 0):
        raise ParameterError("bilateral sigmas must be positive")
    padded = np.ascontiguousarray(np.pad(img, k // 2, mode="edge"))
    inv2c = 0.0 if math.isinf(sigma_color) else 1.0 / (2.0 * sigma_color * sigma_color)
    out = _bilateral_impl(padded, k, img.shape[0], img.shape[1], bilateral_weights_space(k, sigma_space), inv2c)
    return out


def apply_filter(img, spec: FilterSpec) -> np.ndarray:
    if spec.kind == "gaussian":
        return gaussian_filter(img, spec.kernel, spec.sigma_spatial)
    if spec.kind == "average":
        return average_filter(img, spec.kernel)
    if spec.kind == "median":
        return median_filter(img, spec.kernel)
    sigma_space = spec.sigma_spatial if spec.sigma_spatial is not None else 3.0
    return bilateral_filter(img, spec.kernel, spec.sigma_color, sigma_space)


def denoise_stack(images: np.ndarray, spec: FilterSpec) -> np.ndarray:
    return np.stack([apply_filter(im, spec) for im in images]) if len(images) else images.copy()
