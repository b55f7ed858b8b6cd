import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmsod.tensor import (
    ShapeError,
    activation,
    as_tensor,
    concat_channels,
    conv2d,
    layer_norm,
    linear,
    relu,
    sigmoid,
    silu,
    softplus,
    upsample_bilinear_x2,
)


def naive_linear(x, w, b):
    out = np.zeros((x.shape[0], w.shape[0]))
    for l in range(x.shape[0]):
        for o in range(w.shape[0]):
            acc = 0.0
            for i in range(x.shape[1]):
                acc += w[o, i] * x[l, i]
            out[l, o] = acc + b[o]
    return out


def naive_conv2d(x, kernels, bias, stride, padding, groups):
    c_in, h, w = x.shape
    c_out, cpg, kh, kw = kernels.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, h_out, w_out))
    opg = c_out // groups
    for o in range(c_out):
        g = o // opg
        for i in range(h_out):
            for j in range(w_out):
                acc = 0.0
                for ci in range(cpg):
                    for di in range(kh):
                        for dj in range(kw):
                            acc += (
                                kernels[o, ci, di, dj]
                                * xp[g * cpg + ci, i * stride + di, j * stride + dj]
                            )
                out[o, i, j] = acc + (bias[o] if bias is not None else 0.0)
    return out


class TestLinear:
    def test_identity(self):
        x = as_tensor([[1.0, 2.0]])
        assert np.array_equal(linear(x, np.eye(2), np.zeros(2)), x)

    def test_arithmetic(self):
        y = linear(as_tensor([[1.0, 1.0]]), as_tensor([[1.0, 1.0]]), as_tensor([0.5]))
        assert np.array_equal(y, [[2.5]])

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((3, 4))
        w = rng.standard_normal((5, 4))
        b = rng.standard_normal(5)
        assert np.max(np.abs(linear(x, w, b) - naive_linear(x, w, b))) < 1e-12

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(5, 4\)"):
            linear(np.zeros((2, 3)), np.zeros((5, 4)))


class TestConv2d:
    def test_pointwise_identity(self):
        x = np.arange(9.0).reshape(1, 3, 3)
        k = np.ones((1, 1, 1, 1))
        assert np.array_equal(conv2d(x, k), x)

    def test_box_kernel_counts_overlaps(self):
        x = np.ones((1, 3, 3))
        k = np.ones((1, 1, 3, 3))
        y = conv2d(x, k, padding=1)
        assert y[0, 1, 1] == 9.0
        assert y[0, 0, 0] == 4.0 and y[0, 2, 2] == 4.0

    def test_grouped_matches_naive_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((4, 6, 5))
        k = rng.standard_normal((6, 2, 3, 3))
        b = rng.standard_normal(6)
        got = conv2d(x, k, b, stride=2, padding=1, groups=2)
        want = naive_conv2d(x, k, b, stride=2, padding=1, groups=2)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_depthwise_matches_naive_oracle(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((5, 4, 4))
        k = rng.standard_normal((5, 1, 3, 3))
        got = conv2d(x, k, padding=1, groups=5)
        want = naive_conv2d(x, k, None, stride=1, padding=1, groups=5)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_indivisible_groups_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((3, 4, 4)), np.zeros((4, 1, 1, 1)), groups=2)

    def test_vanishing_output_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((1, 2, 2)), np.zeros((1, 1, 3, 3)))


class TestLayerNorm:
    def test_constant_row_collapses_to_beta(self):
        y = layer_norm(as_tensor([[5.0, 5.0, 5.0]]), np.ones(3), np.zeros(3))
        assert np.array_equal(y, np.zeros((1, 3)))

    def test_symmetric_row(self):
        y = layer_norm(as_tensor([[1.0, -1.0]]), np.ones(2), np.zeros(2))
        assert np.allclose(y, [[1.0, -1.0]], atol=1e-4)
        assert abs(y[0, 0] + y[0, 1]) < 1e-15

    def test_moments(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 16))
        eps = 1e-5
        y = layer_norm(x, np.ones(16), np.zeros(16), eps=eps)
        assert np.max(np.abs(y.mean(axis=1))) < 1e-12
        var = y.var(axis=1)
        assert np.all(var <= 1.0 + 1e-15)
        assert np.all(var >= 1.0 - 10 * eps)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_moments_property(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((4, 12))
        y = layer_norm(x, np.ones(12), np.zeros(12))
        assert np.max(np.abs(y.mean(axis=1))) < 1e-12


class TestActivations:
    def test_fixed_points(self):
        assert silu(np.array([0.0]))[0] == 0.0
        assert sigmoid(np.array([0.0]))[0] == 0.5
        assert relu(np.array([-2.0]))[0] == 0.0

    def test_softplus_overflow_branch(self):
        assert abs(softplus(np.array([100.0]))[0] - 100.0) < 1e-12
        # direct formula still representable at x = 20: branch must agree there
        x = np.array([20.0])
        assert abs(softplus(x)[0] - np.log1p(np.exp(20.0))) < 1e-12

    def test_kind_dispatch(self):
        x = np.linspace(-3, 3, 7)
        assert np.array_equal(activation(x, "relu"), relu(x))
        with pytest.raises(ValueError):
            activation(x, "tanh")

    def test_sigmoid_tails_finite(self):
        y = sigmoid(np.array([-1e4, 1e4]))
        assert np.all(np.isfinite(y)) and 0.0 <= y[0] < 1e-300 + 1 and y[1] == 1.0


class TestUpsample:
    def test_constant_plane_preserved(self):
        y = upsample_bilinear_x2(np.full((1, 3, 3), 7.0))
        assert np.array_equal(y, np.full((1, 6, 6), 7.0))

    def test_single_pixel(self):
        y = upsample_bilinear_x2(np.array([[[5.0]]]))
        assert np.array_equal(y, np.full((1, 2, 2), 5.0))

    def test_ramp_matches_pixel_oracle(self):
        def oracle(plane):
            h, w = plane.shape
            out = np.empty((2 * h, 2 * w))
            for oi in range(2 * h):
                for oj in range(2 * w):
                    si = (oi + 0.5) / 2 - 0.5
                    sj = (oj + 0.5) / 2 - 0.5
                    i0, j0 = int(np.floor(si)), int(np.floor(sj))
                    fi, fj = si - i0, sj - j0
                    i0c, i1c = np.clip([i0, i0 + 1], 0, h - 1)
                    j0c, j1c = np.clip([j0, j0 + 1], 0, w - 1)
                    top = plane[i0c, j0c] + fj * (plane[i0c, j1c] - plane[i0c, j0c])
                    bot = plane[i1c, j0c] + fj * (plane[i1c, j1c] - plane[i1c, j0c])
                    out[oi, oj] = top + fi * (bot - top)
            return out

        ramp = np.arange(20.0).reshape(4, 5)
        got = upsample_bilinear_x2(ramp[None])
        assert np.max(np.abs(got[0] - oracle(ramp))) < 1e-12
        # interior slope halves in index space
        row = got[0, 4]
        deltas = np.diff(row)[1:-1]
        assert np.allclose(deltas, 0.5)


class TestConcat:
    def test_scalar_vectors(self):
        assert np.array_equal(concat_channels(np.array([1.0]), np.array([2.0])), [1.0, 2.0])

    def test_split_roundtrip_bit_exact(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 4, 4))
        b = rng.standard_normal((2, 4, 4))
        cat = concat_channels(a, b)
        assert np.array_equal(cat[:3], a)
        assert np.array_equal(cat[3:], b)

    def test_selector_conv_recovers_first_block(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((3, 4, 4))
        cat = concat_channels(x, np.zeros((2, 4, 4)))
        selector = np.zeros((3, 5, 1, 1))
        for c in range(3):
            selector[c, c, 0, 0] = 1.0
        assert np.array_equal(conv2d(cat, selector), x)

    def test_spatial_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            concat_channels(np.zeros((1, 2, 2)), np.zeros((1, 3, 2)))


def test_operations_are_pure():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((4, 6, 6))
    k = rng.standard_normal((6, 4, 3, 3))
    first = conv2d(x, k, padding=1)
    x2, k2 = x.copy(), k.copy()
    second = conv2d(x2, k2, padding=1)
    assert np.array_equal(first, second)
    assert np.array_equal(x, x2) and np.array_equal(k, k2)
