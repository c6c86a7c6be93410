"""On-disk formats: ``DLT1`` tensors, binary PGM images and key/value manifests.

``DLT1`` layout: the 4 magic bytes ``b"DLT1"``, one unsigned byte holding the
rank, ``rank`` little-endian uint32 extents, then the row-major payload as
little-endian float32.
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError

MAGIC = b"DLT1"


def encode_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim > 255:
        raise DimensionError("rank above 255 cannot be encoded")
    if any(e >= 2**32 for e in arr.shape):
        raise DimensionError(f"extent too large for uint32: {arr.shape}")
    header = MAGIC + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_tensor(blob: bytes) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise DataError("not a DLT1 tensor (bad magic)")
    rank = blob[4]
    end = 5 + 4 * rank
    shape = struct.unpack(f"<{rank}I", blob[5:end])
    count = int(np.prod(shape, dtype=np.int64))
    payload = blob[end:]
    if len(payload) != 4 * count:
        raise DataError(f"payload holds {len(payload)} bytes, shape {shape} needs {4 * count}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)


def save_tensor(path: str | os.PathLike, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def load_tensor(path: str | os.PathLike) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def save_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write a binary (P5) 8-bit PGM; values are rounded and clamped to [0, 255]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"PGM needs a 2-D image, got {img.shape}")
    data = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    blob = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos].decode("ascii"))
    if tokens[0] != "P5" or tokens[3] != "255":
        raise DataError("only 8-bit binary PGM (P5, maxval 255) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    raw = blob[pos + 1 : pos + 1 + w * h]
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.float32)


def write_manifest(path: str | os.PathLike, items: dict) -> None:
    lines = []
    for key, value in items.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        text = str(value)
        if "\n" in text:
            raise DataError(f"manifest value for {key!r} spans lines")
        lines.append(f"{key} = {text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"malformed manifest line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
