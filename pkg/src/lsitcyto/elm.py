"""Extreme learning machine autoencoder with online-sequential training.

The hidden layer ``sigmoid(x W^T + b)`` is drawn once from a seed and never
trained. Output weights are the ridge least-squares solution, either in one
batch or accumulated chunk by chunk with the recursive least-squares update

    P_k    = P_{k-1} - P_{k-1} H^T (I + H P_{k-1} H^T)^{-1} H P_{k-1}
    beta_k = beta_{k-1} + P_k H^T (T - H beta_{k-1})

starting from ``P_0 = (H_0^T H_0 + I / C)^{-1}``. After any sequence of chunks
``beta`` equals the batch solution on their concatenation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg

from . import tensorio
from .errors import DataError, DimensionError, NumericError
from .numerics import ridge_solve, sigmoid, solve_normal_equations
from .synth import add_noise_per_sample

DEFAULT_HIDDEN = 2000
DEFAULT_C_REG = 100.0


@dataclass
class ElmModel:
    """Single-hidden-layer network with a frozen random input layer.

    ``input_offset``/``input_gain`` map raw inputs to ``(x - offset) * gain``
    before the hidden layer, and targets are fit in the units
    ``(t - target_offset) / target_scale``. Both default to the identity.
    """

    w_in: np.ndarray  # (d_hidden, d_in)
    b_in: np.ndarray  # (d_hidden,)
    beta: np.ndarray  # (d_hidden, d_out)
    c_reg: float = DEFAULT_C_REG
    seed: int = 0
    activation: str = "sigmoid"
    input_offset: float = 0.0
    input_gain: float = 1.0
    target_offset: float = 0.0
    target_scale: float = 1.0

    @classmethod
    def create(cls, d_in: int, d_hidden: int = DEFAULT_HIDDEN, d_out: int | None = None, seed: int = 0, **kw) -> "ElmModel":
        rng = np.random.default_rng(seed)
        w_in = rng.uniform(-1.0, 1.0, size=(d_hidden, d_in))
        b_in = rng.uniform(-1.0, 1.0, size=d_hidden)
        w_in.flags.writeable = False
        b_in.flags.writeable = False
        d_out = d_in if d_out is None else d_out
        return cls(w_in, b_in, np.zeros((d_hidden, d_out)), seed=seed, **kw)

    @property
    def d_in(self) -> int:
        return self.w_in.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.w_in.shape[0]

    @property
    def d_out(self) -> int:
        return self.beta.shape[1]


def hidden_map(model: ElmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.d_in:
        raise DimensionError(f"input has {x.shape[1]} features, model expects {model.d_in}")
    z = ((x - model.input_offset) * model.input_gain) @ model.w_in.T + model.b_in
    return sigmoid(z)


def _targets(model: ElmModel, t: np.ndarray) -> np.ndarray:
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    if t.shape[1] != model.d_out:
        raise DimensionError(f"targets have {t.shape[1]} columns, model outputs {model.d_out}")
    return (t - model.target_offset) / model.target_scale


def predict(model: ElmModel, x: np.ndarray) -> np.ndarray:
    return hidden_map(model, x) @ model.beta * model.target_scale + model.target_offset


def train_batch(model: ElmModel, x: np.ndarray, t: np.ndarray, c_reg: float | None = None) -> ElmModel:
    """Ridge least-squares output weights; the hidden layer is left untouched."""
    c = model.c_reg if c_reg is None else c_reg
    h = hidden_map(model, x)
    if not np.isfinite(h).all():
        raise NumericError("non-finite hidden activations")
    beta = ridge_solve(h, _targets(model, t), c)
    return replace(model, beta=beta, c_reg=c)


@dataclass
class OselmState:
    model: ElmModel
    p: np.ndarray  # (d_hidden, d_hidden) inverse regularised Gram
    beta: np.ndarray
    c_reg: float
    chunks_seen: int = 1
    samples_seen: int = 0
    history: list[float] = field(default_factory=list)

    def to_model(self) -> ElmModel:
        return replace(self.model, beta=self.beta.copy(), c_reg=self.c_reg)


def oselm_init(model: ElmModel, x0: np.ndarray, t0: np.ndarray, c_reg: float | None = None) -> OselmState:
    c = model.c_reg if c_reg is None else c_reg
    x0 = np.atleast_2d(x0)
    if x0.shape[0] < 1:
        raise DataError("first chunk must hold at least one sample")
    h0 = hidden_map(model, x0)
    t0 = _targets(model, t0)
    gram = h0.T @ h0
    gram[np.diag_indices_from(gram)] += 1.0 / c
    try:
        p = linalg.cho_solve(linalg.cho_factor(gram), np.eye(model.d_hidden))
    except linalg.LinAlgError as exc:
        raise NumericError(f"initial Gram matrix is singular: {exc}") from exc
    p = 0.5 * (p + p.T)
    beta = p @ (h0.T @ t0)
    mse = float(np.mean((h0 @ beta - t0) ** 2))
    return OselmState(model, p, beta, c, 1, x0.shape[0], [mse])


def oselm_update(state: OselmState, x: np.ndarray, t: np.ndarray) -> OselmState:
    h = hidden_map(state.model, x)
    t = _targets(state.model, t)
    ph = state.p @ h.T  # (d, m)
    s = np.eye(h.shape[0]) + h @ ph
    try:
        gain = linalg.cho_solve(linalg.cho_factor(s), ph.T).T  # P H^T S^{-1}
    except linalg.LinAlgError as exc:
        raise NumericError(f"ill-conditioned sequential update: {exc}") from exc
    p = state.p - gain @ ph.T
    p = 0.5 * (p + p.T)
    resid = t - h @ state.beta
    beta = state.beta + p @ (h.T @ resid)
    if not np.isfinite(beta).all():
        raise NumericError("sequential update produced non-finite weights")
    mse = float(np.mean(resid**2))
    return OselmState(
        state.model, p, beta, state.c_reg, state.chunks_seen + 1, state.samples_seen + h.shape[0], state.history + [mse]
    )


def denoise(model: ElmModel, noisy: np.ndarray) -> np.ndarray:
    """Reconstruct one ``s x s`` image or a stack ``(N, s, s)``; output clamped to [0, 255]."""
    noisy = np.asarray(noisy, dtype=np.float32)
    single = noisy.ndim == 2
    stack = noisy[None] if single else noisy
    flat = stack.reshape(stack.shape[0], -1)
    if flat.shape[1] != model.d_in or model.d_in != model.d_out:
        raise DimensionError(f"image of {flat.shape[1]} pixels does not fit a {model.d_in}->{model.d_out} autoencoder")
    out = np.clip(predict(model, flat), 0.0, 255.0).astype(np.float32).reshape(stack.shape)
    return out[0] if single else out


def create_denoiser(window: int, d_hidden: int = DEFAULT_HIDDEN, seed: int = 0, c_reg: float = DEFAULT_C_REG) -> ElmModel:
    """ELM autoencoder for ``window x window`` pixel images.

    Pixels are centred on mid-gray and scaled by ``1 / (128 sqrt(d_in))`` so
    pre-activations stay in the sigmoid's responsive range.
    """
    d_in = window * window
    return ElmModel.create(
        d_in,
        d_hidden,
        seed=seed,
        c_reg=c_reg,
        input_offset=128.0,
        input_gain=4.0 / (128.0 * math.sqrt(d_in)),
        target_offset=128.0,
        target_scale=128.0,
    )


def fit_denoiser(
    model: ElmModel,
    clean: np.ndarray,
    variances=(100, 200, 300, 400, 500, 600),
    copies: int = 2,
    seed: int = 0,
    chunk: int = 1024,
) -> ElmModel:
    """Fit output weights on freshly corrupted copies of ``clean``.

    Normal equations are accumulated chunk by chunk (same optimum as one
    batch solve, bounded memory). Each copy draws one variance per image
    from ``variances``.
    """
    clean = np.asarray(clean, dtype=np.float32)
    flat_clean = clean.reshape(clean.shape[0], -1)
    rng = np.random.default_rng([int(seed), 0xE1A])
    d = model.d_hidden
    gram = np.zeros((d, d))
    rhs = np.zeros((d, model.d_out))
    for _ in range(copies):
        var = rng.choice(np.asarray(variances, dtype=np.float64), size=len(clean))
        noisy = add_noise_per_sample(clean, var, rng).reshape(len(clean), -1)
        for s in range(0, len(clean), chunk):
            h = hidden_map(model, noisy[s : s + chunk])
            gram += h.T @ h
            rhs += h.T @ _targets(model, flat_clean[s : s + chunk])
    beta = solve_normal_equations(gram, rhs, model.c_reg)
    return replace(model, beta=beta)


# ---------------------------------------------------------------------------
# checkpoints


def save_elm(model: ElmModel, directory) -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("w_in", "b_in", "beta"):
        p = root / f"{name}.dlt"
        tensorio.save_tensor(p, getattr(model, name))
        paths.append(p)
    mp = root / "manifest.txt"
    tensorio.write_manifest(
        mp,
        {
            "format": "lsitcyto-elm-1",
            "d_in": model.d_in,
            "d_hidden": model.d_hidden,
            "d_out": model.d_out,
            "activation": model.activation,
            "c_reg": repr(float(model.c_reg)),
            "seed": model.seed,
            "input_offset": repr(float(model.input_offset)),
            "input_gain": repr(float(model.input_gain)),
            "target_offset": repr(float(model.target_offset)),
            "target_scale": repr(float(model.target_scale)),
        },
    )
    paths.append(mp)
    return paths


def load_elm(directory) -> ElmModel:
    root = Path(directory)
    meta = tensorio.read_manifest(root / "manifest.txt")
    if meta.get("format") != "lsitcyto-elm-1":
        raise DataError(f"{root} is not an ELM checkpoint")
    # the random layer is regenerated from the seed (exact), beta is read back
    fresh = ElmModel.create(int(meta["d_in"]), int(meta["d_hidden"]), int(meta["d_out"]), seed=int(meta["seed"]))
    beta = tensorio.load_tensor(root / "beta.dlt").astype(np.float64)
    return replace(
        fresh,
        beta=beta,
        c_reg=float(meta["c_reg"]),
        activation=meta["activation"],
        input_offset=float(meta["input_offset"]),
        input_gain=float(meta["input_gain"]),
        target_offset=float(meta["target_offset"]),
        target_scale=float(meta["target_scale"]),
    )
