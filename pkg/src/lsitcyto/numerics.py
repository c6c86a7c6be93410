"""Dense numeric kernels shared by every other module.

Arrays are plain ``numpy.ndarray`` objects; images and feature maps are
float32 unless a caller explicitly works in float64 (gradient checks do).
Batched image tensors use the ``(N, C, H, W)`` layout.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg

from ._accel import njit, pick
from .errors import DimensionError, NumericError, ParameterError

PADDING_MODES = ("valid", "same")

# Upper bound on the number of scalars in one im2col buffer.
_COLS_BUDGET = 1 << 24


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def ridge_solve(h: np.ndarray, t: np.ndarray, c_reg: float) -> np.ndarray:
    """Solve ``(H^T H + I/c_reg) beta = H^T T`` for beta.

    The Gram matrix is factorised with a Cholesky decomposition, so the
    explicit inverse of the normal equations is never formed. Work is done
    in float64 whatever the input precision.
    """
    h = np.asarray(h, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
        raise DimensionError(f"hidden matrix must be n x d with n, d >= 1, got {h.shape}")
    if t.shape[0] != h.shape[0]:
        raise DimensionError(f"row counts differ: H {h.shape} vs T {t.shape}")
    if not c_reg > 0:
        raise ParameterError(f"c_reg must be positive, got {c_reg}")
    if not (np.isfinite(h).all() and np.isfinite(t).all()):
        raise NumericError("non-finite entries in ridge system")
    return solve_normal_equations(h.T @ h, h.T @ t, c_reg)


def solve_normal_equations(gram: np.ndarray, rhs: np.ndarray, c_reg: float) -> np.ndarray:
    """Cholesky solve of ``(gram + I/c_reg) x = rhs``; ``gram`` is overwritten."""
    if not c_reg > 0:
        raise ParameterError(f"c_reg must be positive, got {c_reg}")
    if not (np.isfinite(gram).all() and np.isfinite(rhs).all()):
        raise NumericError("non-finite entries in normal equations")
    gram[np.diag_indices_from(gram)] += 1.0 / c_reg
    try:
        factor = linalg.cho_factor(gram, lower=False, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericError(f"Gram matrix is not positive definite: {exc}") from exc
    return linalg.cho_solve(factor, rhs, check_finite=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(np.asarray(x).dtype, copy=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-stabilised softmax over the last axis."""
    z = np.asarray(logits)
    if not np.isfinite(z).all():
        raise NumericError("softmax input must be finite")
    z64 = z.astype(np.float64) - z.max(axis=-1, keepdims=True)
    e = np.exp(z64)
    p = e / e.sum(axis=-1, keepdims=True)
    return p.astype(z.dtype if z.dtype.kind == "f" else np.float64)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x.dtype, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# convolution
#
# Patches are laid out one row per (channel, kernel offset) and one column per
# output pixel, so the patch copy writes contiguous runs and the product
# kernels @ cols comes out channel-major.


@njit
def _im2col_loops(x, kh, kw):
    n_img, chans, height, width = x.shape
    oh = height - kh + 1
    ow = width - kw + 1
    cols = np.empty((chans * kh * kw, n_img * oh * ow), dtype=x.dtype)
    for c in range(chans):
        for u in range(kh):
            for v in range(kw):
                row = (c * kh + u) * kw + v
                for n in range(n_img):
                    for i in range(oh):
                        base = (n * oh + i) * ow
                        for j in range(ow):
                            cols[row, base + j] = x[n, c, i + u, j + v]
    return cols


def _im2col_numpy(x, kh, kw):
    n_img, chans, height, width = x.shape
    oh = height - kh + 1
    ow = width - kw + 1
    cols = np.empty((chans, kh, kw, n_img, oh, ow), dtype=x.dtype)
    xt = x.transpose(1, 0, 2, 3)
    for u in range(kh):
        for v in range(kw):
            cols[:, u, v] = xt[:, :, u : u + oh, v : v + ow]
    return cols.reshape(chans * kh * kw, n_img * oh * ow)


# The copy is memory bound and numpy's strided block copies beat the compiled
# loop (see benchmarks/), so both backends use the numpy path here.
im2col = _im2col_numpy


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"expected (C, H, W) or (N, C, H, W) input, got shape {x.shape}")


def same_padding(kh: int, kw: int) -> tuple[int, int]:
    return (kh - 1) // 2, (kw - 1) // 2


def pad_input(x: np.ndarray, kh: int, kw: int, padding: str) -> np.ndarray:
    if padding == "valid":
        return x
    if padding == "same":
        ph, pw = same_padding(kh, kw)
        return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    raise ParameterError(f"unknown padding mode {padding!r}")


def _chunk_size(per_image: int) -> int:
    return max(1, _COLS_BUDGET // max(per_image, 1))


def correlate_valid(xp: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of a padded batch with ``kernels`` (no bias)."""
    n_img, chans, height, width = xp.shape
    c_out, c_in, kh, kw = kernels.shape
    if c_in != chans:
        raise DimensionError(f"kernel expects {c_in} input channels, input has {chans}")
    oh, ow = height - kh + 1, width - kw + 1
    if oh < 1 or ow < 1:
        raise DimensionError(f"kernel {kh}x{kw} larger than (padded) input {height}x{width}")
    wmat = kernels.reshape(c_out, -1).T
    out = np.empty((n_img, c_out, oh, ow), dtype=np.result_type(xp.dtype, kernels.dtype))
    step = _chunk_size(oh * ow * c_in * kh * kw)
    for s in range(0, n_img, step):
        part = xp[s : s + step]
        cols = im2col(np.ascontiguousarray(part), kh, kw)
        # (pixels, taps) @ (taps, c_out) is the faster BLAS orientation
        res = cols.T @ wmat
        out[s : s + step] = res.reshape(part.shape[0], oh, ow, c_out).transpose(0, 3, 1, 2)
    return out


def conv2d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, padding: str = "valid") -> np.ndarray:
    """Shared-weight 2-D cross-correlation plus per-filter bias.

    ``x`` is ``(C_in, H, W)`` or ``(N, C_in, H, W)``; ``kernels`` is
    ``(C_out, C_in, kh, kw)`` with odd spatial extents. ``valid`` shrinks the
    output by ``k - 1``; ``same`` zero-pads so the size is kept.
    """
    xb, single = _as_batch(x)
    kernels = np.asarray(kernels)
    bias = np.asarray(bias)
    if kernels.ndim != 4:
        raise DimensionError(f"kernels must be (C_out, C_in, kh, kw), got {kernels.shape}")
    c_out, _, kh, kw = kernels.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ParameterError(f"kernel extents must be odd, got {kh}x{kw}")
    if bias.shape != (c_out,):
        raise DimensionError(f"bias must have shape ({c_out},), got {bias.shape}")
    out = correlate_valid(pad_input(xb, kh, kw, padding), kernels)
    out += bias.reshape(1, c_out, 1, 1).astype(out.dtype)
    return out[0] if single else out


def flip_kernels(kernels: np.ndarray) -> np.ndarray:
    """Rotate each kernel by 180 degrees and swap the channel axes."""
    return np.ascontiguousarray(kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))


def conv2d_backward(
    xp: np.ndarray, kernels: np.ndarray, dz: np.ndarray, padding: str, need_dx: bool = True
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Gradients of a conv layer given the padded input and the output delta.

    Kernel gradients correlate the stored input with the delta maps; the
    input gradient is a full correlation of the delta with the 180-degree
    flipped kernels, cropped back to the unpadded input extent.
    """
    c_out, c_in, kh, kw = kernels.shape
    n_img = xp.shape[0]
    oh, ow = dz.shape[2], dz.shape[3]
    dw = np.zeros((c_out, c_in * kh * kw), dtype=np.result_type(xp.dtype, dz.dtype))
    step = _chunk_size(oh * ow * c_in * kh * kw)
    for s in range(0, n_img, step):
        part = np.ascontiguousarray(xp[s : s + step])
        cols = im2col(part, kh, kw)
        dzmat = dz[s : s + step].transpose(1, 0, 2, 3).reshape(c_out, -1)
        dw += dzmat @ cols.T
    dw = dw.reshape(kernels.shape)
    db = dz.sum(axis=(0, 2, 3), dtype=np.float64).astype(dw.dtype)
    dx = None
    if need_dx:
        ph, pw = (0, 0) if padding == "valid" else same_padding(kh, kw)
        qh, qw = kh - 1 - ph, kw - 1 - pw
        dzp = np.pad(dz, ((0, 0), (0, 0), (qh, qh), (qw, qw)))
        dx = correlate_valid(dzp, flip_kernels(kernels))
    return dx, dw, db


# ---------------------------------------------------------------------------
# max pooling


@njit
def _maxpool_loops(x, k):
    n_img, chans, height, width = x.shape
    oh = height // k
    ow = width // k
    out = np.empty((n_img, chans, oh, ow), dtype=x.dtype)
    mask = np.empty((n_img, chans, oh, ow), dtype=np.int64)
    for n in range(n_img):
        for c in range(chans):
            for i in range(oh):
                for j in range(ow):
                    r0 = i * k
                    c0 = j * k
                    best = x[n, c, r0, c0]
                    arg = r0 * width + c0
                    for u in range(k):
                        for v in range(k):
                            val = x[n, c, r0 + u, c0 + v]
                            if val > best:
                                best = val
                                arg = (r0 + u) * width + c0 + v
                    out[n, c, i, j] = best
                    mask[n, c, i, j] = arg
    return out, mask


def _maxpool_numpy(x, k):
    n_img, chans, height, width = x.shape
    oh, ow = height // k, width // k
    win = x[:, :, : oh * k, : ow * k].reshape(n_img, chans, oh, k, ow, k)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(n_img, chans, oh, ow, k * k)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    u, v = np.divmod(arg, k)
    rows = np.arange(oh)[:, None] * k + u
    cols = np.arange(ow)[None, :] * k + v
    return out, (rows * width + cols).astype(np.int64)


_maxpool_impl = pick(_maxpool_loops, _maxpool_numpy)


def maxpool2d(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping ``k x k`` max pooling with stride ``k``.

    Returns the pooled maps and a mask holding, for every output cell, the
    flat ``row * W + col`` index of the winning input pixel. Ties go to the
    lowest flat index; trailing rows/columns that do not fill a window are
    dropped.
    """
    if not isinstance(k, (int, np.integer)) or k <= 0:
        raise ParameterError(f"pool size must be a positive int, got {k!r}")
    xb, single = _as_batch(x)
    if xb.shape[2] < k or xb.shape[3] < k:
        raise DimensionError(f"pool size {k} exceeds input {xb.shape[2]}x{xb.shape[3]}")
    out, mask = _maxpool_impl(np.ascontiguousarray(xb), int(k))
    if single:
        return out[0], mask[0]
    return out, mask


def maxpool2d_backward(dout: np.ndarray, mask: np.ndarray, in_shape: tuple[int, ...]) -> np.ndarray:
    """Route pooled gradients back to the stored argmax positions."""
    dx = np.zeros(in_shape, dtype=dout.dtype)
    lead = in_shape[:-2]
    plane = in_shape[-2] * in_shape[-1]
    flat = dx.reshape(*lead, plane)
    np.put_along_axis(flat, mask.reshape(*lead, -1), dout.reshape(*lead, -1), axis=-1)
    return dx


# ---------------------------------------------------------------------------
# geometry


def _rotation_terms(degrees: float) -> tuple[float, float]:
    rad = math.radians(degrees)
    c, s = math.cos(rad), math.sin(rad)
    # snap exact quarter turns so they reduce to index permutations
    if abs(c) < 1e-12:
        c = 0.0
    if abs(s) < 1e-12:
        s = 0.0
    if abs(abs(c) - 1.0) < 1e-12:
        c = math.copysign(1.0, c)
    if abs(abs(s) - 1.0) < 1e-12:
        s = math.copysign(1.0, s)
    return c, s


def border_mean(img: np.ndarray) -> float:
    h, w = img.shape
    if h <= 2 or w <= 2:
        return float(np.mean(img, dtype=np.float64))
    ring = np.concatenate([img[0], img[-1], img[1:-1, 0], img[1:-1, -1]])
    return float(np.mean(ring, dtype=np.float64))


@njit
def _rotate_loops(img, cos_t, sin_t, fill):
    h, w = img.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            dy = i - cy
            dx = j - cx
            xs = cos_t * dx + sin_t * dy + cx
            ys = -sin_t * dx + cos_t * dy + cy
            if ys < 0.0 or ys > h - 1 or xs < 0.0 or xs > w - 1:
                out[i, j] = fill
                continue
            y0 = int(math.floor(ys))
            x0 = int(math.floor(xs))
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = ys - y0
            fx = xs - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out


def _rotate_numpy(img, cos_t, sin_t, fill):
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dy, dx = ii - cy, jj - cx
    xs = cos_t * dx + sin_t * dy + cx
    ys = -sin_t * dx + cos_t * dy + cy
    inside = (ys >= 0) & (ys <= h - 1) & (xs >= 0) & (xs <= w - 1)
    ysc = np.clip(ys, 0, h - 1)
    xsc = np.clip(xs, 0, w - 1)
    y0 = np.floor(ysc).astype(np.int64)
    x0 = np.floor(xsc).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy, fx = ysc - y0, xsc - x0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return np.where(inside, top * (1.0 - fy) + bot * fy, fill)


_rotate_impl = pick(_rotate_loops, _rotate_numpy)


def rotate_image(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate clockwise (as displayed, rows pointing down) about the centre.

    Bilinear interpolation; output pixels whose source falls outside the
    image take the mean of the input's border pixels.
    """
    img = np.asarray(img)
    if img.ndim != 2:
        raise DimensionError(f"rotate_image expects a 2-D image, got {img.shape}")
    c, s = _rotation_terms(float(degrees))
    src = np.ascontiguousarray(img, dtype=np.float64)
    out = _rotate_impl(src, c, s, border_mean(src))
    return out.astype(img.dtype if img.dtype.kind == "f" else np.float32)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment and clamped edges."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape

    def axis(n_in, n_out):
        pos = np.clip((np.arange(n_out) + 0.5) * n_in / n_out - 0.5, 0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy)[:, None] + bot * fy[:, None]
