import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsitcyto import numerics as nm
from lsitcyto.errors import DimensionError, NumericError, ParameterError


def brute_correlate(x, k):
    n, c, h, w = x.shape
    co, _, kh, kw = k.shape
    out = np.zeros((n, co, h - kh + 1, w - kw + 1))
    for a in range(n):
        for o in range(co):
            for i in range(h - kh + 1):
                for j in range(w - kw + 1):
                    out[a, o, i, j] = np.sum(x[a, :, i : i + kh, j : j + kw] * k[o])
    return out


# -- linear algebra -------------------------------------------------------------


def test_ridge_solve_matches_closed_form():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(30, 8))
    t = rng.normal(size=(30, 3))
    beta = nm.ridge_solve(h, t, 10.0)
    ref = np.linalg.solve(h.T @ h + np.eye(8) / 10.0, h.T @ t)
    assert np.allclose(beta, ref, rtol=1e-10, atol=1e-12)


def test_ridge_solve_underdetermined_is_finite():
    rng = np.random.default_rng(1)
    beta = nm.ridge_solve(rng.normal(size=(3, 20)), rng.normal(size=(3, 2)), 1.0)
    assert np.isfinite(beta).all()


def test_ridge_solve_validation():
    with pytest.raises(DimensionError):
        nm.ridge_solve(np.ones((3, 2)), np.ones((4, 1)), 1.0)
    with pytest.raises(ParameterError):
        nm.ridge_solve(np.ones((3, 2)), np.ones((3, 1)), 0.0)
    with pytest.raises(NumericError):
        nm.ridge_solve(np.array([[np.nan, 1.0]]), np.ones((1, 1)), 1.0)


def test_matmul_shape_check():
    with pytest.raises(DimensionError):
        nm.matmul(np.ones((2, 3)), np.ones((2, 3)))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(-100, 100))
def test_softmax_sums_to_one_and_shift_invariant(z, shift):
    z = np.array(z)
    p = nm.softmax(z)
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.allclose(nm.softmax(z + shift), p, atol=1e-12)


def test_sigmoid_extremes_are_finite():
    s = nm.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.allclose(s, [0.0, 0.5, 1.0])


# -- convolution ----------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(1, 4),
    st.sampled_from([1, 3, 5]),
    st.integers(5, 9),
    st.integers(0, 2**31 - 1),
)
def test_conv_matches_brute_force(n, c_in, c_out, k, size, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, c_in, size, size + 1))
    w = rng.normal(size=(c_out, c_in, k, k))
    b = rng.normal(size=c_out)
    got = nm.conv2d(x, w, b, "valid")
    assert np.allclose(got, brute_correlate(x, w) + b[None, :, None, None], atol=1e-10)
    same = nm.conv2d(x, w, b, "same")
    assert same.shape == (n, c_out, size, size + 1)
    xp = np.pad(x, ((0, 0), (0, 0), (k // 2, k // 2), (k // 2, k // 2)))
    assert np.allclose(same, brute_correlate(xp, w) + b[None, :, None, None], atol=1e-10)


def test_conv_single_image_and_validation():
    x = np.ones((2, 6, 6))
    w = np.ones((3, 2, 3, 3))
    out = nm.conv2d(x, w, np.zeros(3))
    assert out.shape == (3, 4, 4) and np.all(out == 18)
    with pytest.raises(ParameterError):
        nm.conv2d(x, np.ones((3, 2, 2, 2)), np.zeros(3))
    with pytest.raises(DimensionError):
        nm.conv2d(x, np.ones((3, 1, 3, 3)), np.zeros(3))
    with pytest.raises(DimensionError):
        nm.conv2d(np.ones((2, 2, 2)), w, np.zeros(3))


def test_conv_backward_matches_brute_gradients():
    rng = np.random.default_rng(4)
    for padding in ("valid", "same"):
        x = rng.normal(size=(2, 2, 7, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        xp = nm.pad_input(x, 3, 3, padding)
        z = nm.correlate_valid(xp, w)
        dz = rng.normal(size=z.shape)
        dx, dw, db = nm.conv2d_backward(xp, w, dz, padding)
        # loss = sum(z * dz) is linear, so the gradients are exact adjoints
        dw_ref = np.zeros_like(w)
        for o in range(3):
            for c in range(2):
                for u in range(3):
                    for v in range(3):
                        dw_ref[o, c, u, v] = np.sum(dz[:, o] * xp[:, c, u : u + z.shape[2], v : v + z.shape[3]])
        assert np.allclose(dw, dw_ref, atol=1e-10)
        assert np.allclose(db, dz.sum(axis=(0, 2, 3)))
        dxp = np.zeros_like(xp)
        for u in range(3):
            for v in range(3):
                dxp[:, :, u : u + z.shape[2], v : v + z.shape[3]] += np.einsum("nohw,oc->nchw", dz, w[:, :, u, v])
        if padding == "same":
            dxp = dxp[:, :, 1:-1, 1:-1]
        assert np.allclose(dx, dxp, atol=1e-10)


def test_flip_kernels():
    w = np.arange(2 * 3 * 3 * 3, dtype=float).reshape(2, 3, 3, 3)
    f = nm.flip_kernels(w)
    assert f.shape == (3, 2, 3, 3)
    assert f[1, 0, 0, 0] == w[0, 1, 2, 2]


def test_im2col_backends_agree():
    x = np.random.default_rng(0).normal(size=(2, 3, 6, 7))
    assert np.array_equal(nm._im2col_loops(x, 3, 3), nm._im2col_numpy(x, 3, 3))


# -- pooling --------------------------------------------------------------------


def test_maxpool_truncates_and_ties_go_low():
    x = np.zeros((1, 1, 7, 7))
    x[0, 0, 4, 4] = 5.0
    out, mask = nm.maxpool2d(x, 3)
    assert out.shape == (1, 1, 2, 2)
    assert out[0, 0, 1, 1] == 5.0
    assert mask[0, 0, 1, 1] == 4 * 7 + 4
    assert mask[0, 0, 0, 0] == 0  # all-equal window: first element wins


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(4, 13), st.integers(0, 2**31 - 1))
def test_maxpool_backends_and_routing(k, size, seed):
    if size < k:
        return
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 4, size=(2, 2, size, size)).astype(np.float64)  # many ties
    a, ma = nm._maxpool_loops(x, k)
    b, mb = nm._maxpool_numpy(x, k)
    assert np.array_equal(a, b) and np.array_equal(ma, mb)
    dout = rng.normal(size=a.shape)
    dx = nm.maxpool2d_backward(dout, ma, x.shape)
    assert np.isclose(dx.sum(), dout.sum())
    assert np.count_nonzero(dx) <= dout.size


def test_maxpool_rejects_oversized_window():
    with pytest.raises(DimensionError):
        nm.maxpool2d(np.ones((1, 1, 2, 2)), 3)


# -- geometry -------------------------------------------------------------------


def test_rotation_quarter_turns_are_exact():
    img = np.arange(25, dtype=np.float64).reshape(5, 5)
    assert np.array_equal(nm.rotate_image(img, 0), img)
    # clockwise as displayed: the top row becomes the right column
    assert np.array_equal(nm.rotate_image(img, 90), np.rot90(img, -1))
    assert np.array_equal(nm.rotate_image(img, 180), img[::-1, ::-1])


@settings(max_examples=25, deadline=None)
@given(st.floats(-360, 360), st.integers(0, 2**31 - 1))
def test_rotate_backends_agree(angle, seed):
    img = np.random.default_rng(seed).uniform(0, 255, (11, 11))
    c, s = nm._rotation_terms(angle)
    fill = nm.border_mean(img)
    assert np.allclose(nm._rotate_loops(img, c, s, fill), nm._rotate_numpy(img, c, s, fill), atol=1e-9)


def test_rotation_preserves_constant_image():
    img = np.full((9, 9), 77.0)
    assert np.allclose(nm.rotate_image(img, 37.0), 77.0)


def test_resize_bilinear_identity_and_constant():
    img = np.random.default_rng(2).normal(size=(6, 6))
    assert np.allclose(nm.resize_bilinear(img, 6, 6), img)
    assert np.allclose(nm.resize_bilinear(np.full((4, 4), 3.0), 50, 50), 3.0)
