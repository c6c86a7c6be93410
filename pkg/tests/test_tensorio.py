import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lsitcyto import tensorio
from lsitcyto.errors import DataError


@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=0, max_dims=4, max_side=5), elements=st.floats(-1e6, 1e6, width=32)))
def test_tensor_roundtrip(arr):
    back = tensorio.decode_tensor(tensorio.encode_tensor(arr))
    assert back.shape == arr.shape and np.array_equal(back, arr)


def test_tensor_layout():
    blob = tensorio.encode_tensor(np.array([[1.0, 2.0, 3.0]], dtype=np.float32))
    assert blob[:4] == b"DLT1" and blob[4] == 2
    assert struct.unpack("<2I", blob[5:13]) == (1, 3)
    assert struct.unpack("<3f", blob[13:]) == (1.0, 2.0, 3.0)


def test_tensor_rejects_bad_input():
    with pytest.raises(DataError):
        tensorio.decode_tensor(b"XXXX\x00")
    blob = tensorio.encode_tensor(np.ones(3))
    with pytest.raises(DataError):
        tensorio.decode_tensor(blob[:-1])


def test_pgm_roundtrip(tmp_path):
    img = np.arange(12, dtype=np.float32).reshape(3, 4) * 20
    tensorio.save_pgm(tmp_path / "a.pgm", img)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    assert np.array_equal(tensorio.load_pgm(tmp_path / "a.pgm"), np.clip(img, 0, 255))


def test_pgm_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x05\xff")
    assert np.array_equal(tensorio.load_pgm(p), [[5.0, 255.0]])


def test_manifest_roundtrip(tmp_path):
    p = tmp_path / "m.txt"
    tensorio.write_manifest(p, {"a": 1, "b": [1, 2, 3], "c": "x = y"})
    assert tensorio.read_manifest(p) == {"a": "1", "b": "1,2,3", "c": "x = y"}
    with pytest.raises(DataError):
        tensorio.write_manifest(p, {"bad": "two\nlines"})


def test_file_sha256(tmp_path):
    p = tmp_path / "f"
    p.write_bytes(b"abc")
    assert tensorio.file_sha256(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
