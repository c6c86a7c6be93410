"""Synthetic diffraction-pattern datasets.

Each cell class is a radially symmetric pattern: a central disc (bright or
dark depending on the sign of ``contrast``) surrounded by damped cosine
rings on a mid-gray background. Base samples are rendered on a 96x96
master, rotated in 10 degree steps and centre-cropped, and whole base
samples are assigned to one split so rotations never leak across folds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import CapacityError, DataError, DimensionError, ParameterError
from .numerics import rotate_image

WINDOW_SIZES = (66, 60, 56, 50, 46, 40, 36)
ROTATIONS_PER_BASE = 36
ROTATION_STEP_DEG = 10.0
MASTER_SIZE = 96
BACKGROUND = 128.0
RING_AMPLITUDE = 100.0
SPLITS = ("train", "val", "test")
DEFAULT_SPLIT = (1490, 166, 324)


@dataclass(frozen=True)
class CellClassSpec:
    name: str
    disc_radius_px: float
    ring_period_px: float
    ring_decay: float
    contrast: float
    center_jitter_px: float = 1.0
    radius_jitter_frac: float = 0.05

    def __post_init__(self):
        if self.disc_radius_px <= 0:
            raise ParameterError(f"{self.name}: disc_radius_px must be positive")
        if self.ring_period_px <= 1:
            raise ParameterError(f"{self.name}: ring_period_px must exceed 1")
        if not 0 < self.ring_decay <= 1:
            raise ParameterError(f"{self.name}: ring_decay must lie in (0, 1]")
        if not -1 <= self.contrast <= 1:
            raise ParameterError(f"{self.name}: contrast must lie in [-1, 1]")
        if self.center_jitter_px < 0 or self.radius_jitter_frac < 0:
            raise ParameterError(f"{self.name}: jitters must be non-negative")

    def generative_params(self) -> tuple[float, ...]:
        return (self.disc_radius_px, self.ring_period_px, self.ring_decay, self.contrast)


# Stand-ins for the six classes studied (two blood cell types, two cancer
# lines, two bead sizes). Every pair differs by >= 10% in some parameter.
DEFAULT_CLASSES = (
    CellClassSpec("rbc", 5.0, 6.0, 0.75, 0.8),
    CellClassSpec("wbc", 7.0, 7.0, 0.80, -0.7),
    CellClassSpec("mcf7", 10.0, 8.5, 0.85, 0.6),
    CellClassSpec("hepg2", 8.5, 9.5, 0.82, -0.5),
    CellClassSpec("bead10", 6.0, 5.0, 0.65, 1.0),
    CellClassSpec("bead20", 12.0, 11.0, 0.90, 0.9),
)


def classes_distinct(specs, min_rel: float = 0.10) -> bool:
    """True when every pair of specs differs by >= ``min_rel`` in one parameter."""
    for i, a in enumerate(specs):
        for b in specs[i + 1 :]:
            ok = False
            for pa, pb in zip(a.generative_params(), b.generative_params()):
                scale = max(abs(pa), abs(pb))
                if scale > 0 and abs(pa - pb) / scale >= min_rel:
                    ok = True
                    break
            if not ok:
                return False
    return True


def generate_pattern(spec: CellClassSpec, master_size: int = MASTER_SIZE, seed: int = 0) -> np.ndarray:
    if master_size < 96:
        raise ParameterError(f"master_size must be >= 96, got {master_size}")
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-1.0, 1.0, size=2) * spec.center_jitter_px
    radius = spec.disc_radius_px * (1.0 + rng.uniform(-1.0, 1.0) * spec.radius_jitter_frac)
    c0 = (master_size - 1) / 2.0
    yy, xx = np.mgrid[0:master_size, 0:master_size].astype(np.float64)
    r = np.hypot(yy - (c0 + jitter[0]), xx - (c0 + jitter[1]))
    period = spec.ring_period_px
    # soft disc edge, about one pixel wide
    disc = 0.5 * (1.0 - np.tanh((r - radius) / 1.5))
    rings = -np.cos(2.0 * math.pi * (r - radius) / period) * spec.ring_decay ** (r / period)
    profile = disc + (1.0 - disc) * rings
    img = BACKGROUND + RING_AMPLITUDE * spec.contrast * profile
    return np.clip(img, 0.0, 255.0).astype(np.float32)


def center_crop(img: np.ndarray, window: int) -> np.ndarray:
    h, w = img.shape[-2:]
    if window > h or window > w:
        raise DimensionError(f"window {window} larger than image {h}x{w}")
    top, left = (h - window) // 2, (w - window) // 2
    return img[..., top : top + window, left : left + window]


def base_seed(seed: int, base_id: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(base_id)]).generate_state(1, np.uint64)[0])


@dataclass
class Dataset:
    images: np.ndarray  # (N, s, s) float32 in [0, 255]
    labels: np.ndarray  # (N,) int64
    base_ids: np.ndarray  # (N,) int64
    rotations: np.ndarray  # (N,) float32 degrees
    splits: np.ndarray  # (N,) '<U5' in SPLITS
    class_names: list[str]
    window: int
    seed: int = 0
    split_bases: tuple[int, int, int] = (0, 0, 0)
    notes: list[str] = field(default_factory=list)
    specs: tuple[CellClassSpec, ...] = ()

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}")
        sel = self.splits == name
        return self.images[sel], self.labels[sel]

    def counts(self) -> dict[str, np.ndarray]:
        return {
            s: np.bincount(self.labels[self.splits == s], minlength=self.n_classes) for s in SPLITS
        }

    def subset(self, mask: np.ndarray) -> "Dataset":
        return replace(
            self,
            images=self.images[mask],
            labels=self.labels[mask],
            base_ids=self.base_ids[mask],
            rotations=self.rotations[mask],
            splits=self.splits[mask],
            notes=list(self.notes),
        )

    def select_classes(self, names: list[str]) -> "Dataset":
        """Keep only ``names``, relabelled 0..len(names)-1 in the given order."""
        missing = [n for n in names if n not in self.class_names]
        if missing:
            raise DataError(f"unknown classes {missing}")
        old = [self.class_names.index(n) for n in names]
        lut = np.full(self.n_classes, -1, dtype=np.int64)
        lut[old] = np.arange(len(old))
        out = self.subset(lut[self.labels] >= 0)
        out.labels = lut[out.labels]
        out.class_names = list(names)
        by_name = {s.name: s for s in self.specs}
        out.specs = tuple(by_name[n] for n in names if n in by_name)
        return out


def _realise_split(split_counts, base_per_class: int) -> tuple[tuple[int, int, int], list[str]]:
    counts = tuple(int(c) for c in split_counts)
    if len(counts) != 3 or min(counts) < 0:
        raise ParameterError(f"split counts must be three non-negative ints, got {split_counts}")
    capacity = base_per_class * ROTATIONS_PER_BASE
    if sum(counts) > capacity:
        raise CapacityError(f"requested {sum(counts)} samples per class, capacity is {capacity}")
    bases = [int(math.floor(c / ROTATIONS_PER_BASE + 0.5)) for c in counts]
    notes = []
    while sum(bases) > base_per_class:
        i = int(np.argmax(bases))
        bases[i] -= 1
    realised = tuple(b * ROTATIONS_PER_BASE for b in bases)
    if realised != counts:
        notes.append(
            "split {}/{}/{} rounded to whole base samples: {}/{}/{} ({}x{} bases)".format(
                *counts, *realised, "/".join(map(str, bases)), ROTATIONS_PER_BASE
            )
        )
    if any(counts[i] > 0 and bases[i] == 0 for i in range(3)):
        raise CapacityError(f"split {counts} leaves an empty fold after rounding to base samples")
    return tuple(bases), notes


def build_dataset(
    specs=DEFAULT_CLASSES,
    base_per_class: int = 55,
    window: int = 50,
    split_counts=DEFAULT_SPLIT,
    seed: int = 0,
) -> Dataset:
    specs = tuple(specs)
    if window not in WINDOW_SIZES:
        raise ParameterError(f"unsupported window {window}; choose from {WINDOW_SIZES}")
    if base_per_class < 1:
        raise ParameterError("base_per_class must be >= 1")
    split_bases, notes = _realise_split(split_counts, base_per_class)
    angles = np.arange(ROTATIONS_PER_BASE) * ROTATION_STEP_DEG

    n_total = len(specs) * base_per_class * ROTATIONS_PER_BASE
    images = np.empty((n_total, window, window), dtype=np.float32)
    labels = np.empty(n_total, dtype=np.int64)
    base_ids = np.empty(n_total, dtype=np.int64)
    rotations = np.empty(n_total, dtype=np.float32)
    splits = np.empty(n_total, dtype="<U5")

    k = 0
    for ci, spec in enumerate(specs):
        order = np.random.default_rng([int(seed), ci, 0x5EED]).permutation(base_per_class)
        tag = np.empty(base_per_class, dtype="<U5")
        tag[order[: split_bases[0]]] = "train"
        tag[order[split_bases[0] : split_bases[0] + split_bases[1]]] = "val"
        tag[order[split_bases[0] + split_bases[1] : sum(split_bases)]] = "test"
        tag[order[sum(split_bases) :]] = ""
        for b in range(base_per_class):
            bid = ci * base_per_class + b
            master = generate_pattern(spec, MASTER_SIZE, base_seed(seed, bid))
            for angle in angles:
                images[k] = center_crop(rotate_image(master, angle), window)
                labels[k] = ci
                base_ids[k] = bid
                rotations[k] = angle
                splits[k] = tag[b]
                k += 1
    np.clip(images, 0.0, 255.0, out=images)
    ds = Dataset(
        images=images,
        labels=labels,
        base_ids=base_ids,
        rotations=rotations,
        splits=splits,
        class_names=[s.name for s in specs],
        window=window,
        seed=int(seed),
        split_bases=split_bases,
        notes=notes,
        specs=specs,
    )
    unused = splits == ""
    return ds.subset(~unused) if unused.any() else ds


def recrop(dataset: Dataset, window: int) -> Dataset:
    if window > dataset.window:
        raise DimensionError(f"cannot crop {dataset.window}px samples to {window}px")
    out = dataset.subset(np.ones(len(dataset), dtype=bool))
    out.images = np.ascontiguousarray(center_crop(dataset.images, window))
    out.window = window
    return out


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int = 0
    mean: float = 0.0
    clip: bool = True

    def __post_init__(self):
        if self.variance < 0:
            raise ParameterError(f"noise variance must be non-negative, got {self.variance}")


def add_gaussian_noise(img: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Return ``img + n`` with ``n ~ N(mean, variance)``, optionally clamped to [0, 255]."""
    img = np.asarray(img, dtype=np.float32)
    if spec.variance == 0 and spec.mean == 0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(spec.mean, math.sqrt(spec.variance), size=img.shape)
    out = img.astype(np.float64) + noise
    if spec.clip:
        np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.float32)


def add_noise_per_sample(images: np.ndarray, variances: np.ndarray, rng: np.random.Generator, clip: bool = True) -> np.ndarray:
    """Corrupt a stack of images, each with its own noise variance."""
    sd = np.sqrt(np.asarray(variances, dtype=np.float64)).reshape(-1, *([1] * (images.ndim - 1)))
    out = images.astype(np.float64) + rng.standard_normal(images.shape) * sd
    if clip:
        np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# persistence

_ROLES = ("images", "labels", "base_ids", "rotations")


def save_dataset(ds: Dataset, directory) -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    counts = ds.counts()
    meta = {
        "format": "lsitcyto-dataset-1",
        "classes": ds.class_names,
        "window": ds.window,
        "seed": ds.seed,
        "rotations_per_base": ROTATIONS_PER_BASE,
        "split_bases": ds.split_bases,
    }
    for s in SPLITS:
        meta[f"count.{s}"] = list(counts[s])
    for spec in ds.specs:
        meta[f"class.{spec.name}"] = [
            spec.disc_radius_px,
            spec.ring_period_px,
            spec.ring_decay,
            spec.contrast,
            spec.center_jitter_px,
            spec.radius_jitter_frac,
        ]
    for i, note in enumerate(ds.notes):
        meta[f"note.{i}"] = note
    for s in SPLITS:
        sel = ds.splits == s
        arrays = {
            "images": ds.images[sel],
            "labels": ds.labels[sel],
            "base_ids": ds.base_ids[sel],
            "rotations": ds.rotations[sel],
        }
        for role in _ROLES:
            p = root / f"{s}_{role}.dlt"
            tensorio.save_tensor(p, arrays[role])
            written.append(p)
    mp = root / "manifest.txt"
    tensorio.write_manifest(mp, meta)
    written.append(mp)
    return written


def load_dataset(directory) -> Dataset:
    root = Path(directory)
    mp = root / "manifest.txt"
    if not mp.exists():
        raise DataError(f"no dataset manifest in {root}")
    meta = tensorio.read_manifest(mp)
    parts = {r: [] for r in _ROLES}
    tags = []
    for s in SPLITS:
        loaded = {r: tensorio.load_tensor(root / f"{s}_{r}.dlt") for r in _ROLES}
        for r in _ROLES:
            parts[r].append(loaded[r])
        tags.append(np.full(len(loaded["labels"]), s, dtype="<U5"))
    names = meta["classes"].split(",")
    specs = []
    for n in names:
        key = f"class.{n}"
        if key in meta:
            v = [float(x) for x in meta[key].split(",")]
            specs.append(CellClassSpec(n, *v))
    window = int(meta["window"])
    images = np.concatenate(parts["images"]).reshape(-1, window, window)
    return Dataset(
        images=images.astype(np.float32),
        labels=np.concatenate(parts["labels"]).astype(np.int64),
        base_ids=np.concatenate(parts["base_ids"]).astype(np.int64),
        rotations=np.concatenate(parts["rotations"]).astype(np.float32),
        splits=np.concatenate(tags),
        class_names=names,
        window=window,
        seed=int(meta.get("seed", 0)),
        split_bases=tuple(int(x) for x in meta.get("split_bases", "0,0,0").split(",")),
        notes=[v for k, v in sorted(meta.items()) if k.startswith("note.")],
        specs=tuple(specs),
    )


def export_pgm(ds: Dataset, directory, per_class: int = 4, split: str = "test") -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    images, labels = ds.split(split)
    for ci, name in enumerate(ds.class_names):
        for j, idx in enumerate(np.flatnonzero(labels == ci)[:per_class]):
            p = root / f"{split}_{name}_{j:03d}.pgm"
            tensorio.save_pgm(p, images[idx])
            written.append(p)
    return written
