import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsitcyto import classical as cl
from lsitcyto.errors import DimensionError, ParameterError
from oracles import oracle


images = st.tuples(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**31 - 1)).map(
    lambda t: np.random.default_rng(t[2]).uniform(0, 255, (t[0], t[1]))
)


@settings(max_examples=50, deadline=None)
@given(images, st.sampled_from([1, 3, 5]))
@pytest.mark.parametrize("kind", cl.FILTER_KINDS)
def test_filters_match_brute_force(kind, img, k):
    spec = cl.FilterSpec(kind, k, sigma_spatial=None if kind != "bilateral" else 3.0)
    got = cl.apply_filter(img, spec)
    assert got.shape == img.shape
    assert np.allclose(got, oracle(img, kind, k), atol=1e-5, rtol=0)


def test_bilateral_large_sigma_color_is_spatial_gaussian():
    img = np.random.default_rng(0).uniform(0, 255, (9, 9))
    got = cl.bilateral_filter(img, 3, sigma_color=math.inf, sigma_space=0.8)
    assert np.allclose(got, cl.gaussian_filter(img, 3, 0.8), atol=1e-9)


def test_bilateral_preserves_steps_better_than_gaussian():
    img = np.zeros((10, 10))
    img[:, 5:] = 200.0
    b = cl.bilateral_filter(img, 3, 3.0, 3.0)
    g = cl.gaussian_filter(img, 3)
    assert np.abs(b - img).max() < 1e-3 < np.abs(g - img).max()


@given(st.floats(0, 255), st.sampled_from(cl.FILTER_KINDS))
def test_constant_image_is_fixed_point(value, kind):
    img = np.full((6, 7), value)
    assert np.allclose(cl.apply_filter(img, cl.DEFAULT_FILTERS[kind]), value, atol=1e-9)


def test_median_removes_isolated_impulse():
    img = np.full((7, 7), 10.0)
    img[3, 3] = 255.0
    assert np.all(cl.median_filter(img) == 10.0)


def test_median_and_bilateral_backends_agree():
    rng = np.random.default_rng(5)
    img = rng.uniform(0, 255, (12, 10))
    padded = np.ascontiguousarray(np.pad(img, 2, mode="edge"))
    assert np.array_equal(cl._median_loops(padded, 5, 12, 10), cl._median_numpy(padded, 5, 12, 10))
    sw = cl.bilateral_weights_space(5, 2.0)
    assert np.allclose(cl._bilateral_loops(padded, 5, 12, 10, sw, 0.01), cl._bilateral_numpy(padded, 5, 12, 10, sw, 0.01))


def test_default_sigma():
    assert math.isclose(cl.default_sigma(3), 0.8)
    assert math.isclose(cl.default_sigma(5), 1.1)


def test_validation():
    with pytest.raises(ParameterError):
        cl.FilterSpec("median", 4)
    with pytest.raises(ParameterError):
        cl.FilterSpec("sharpen")
    with pytest.raises(ParameterError):
        cl.bilateral_filter(np.ones((3, 3)), 3, sigma_color=0.0)
    with pytest.raises(DimensionError):
        cl.median_filter(np.ones((2, 2, 2)))


def test_denoise_stack():
    stack = np.random.default_rng(1).uniform(0, 255, (3, 8, 8)).astype(np.float32)
    out = cl.denoise_stack(stack, cl.DEFAULT_FILTERS["average"])
    assert out.shape == stack.shape
    assert np.allclose(out[1], cl.average_filter(stack[1]))
