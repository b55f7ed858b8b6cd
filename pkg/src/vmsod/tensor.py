"""Dense float64 tensor primitives: linear maps, convolution, normalization,
activations, resampling and concatenation.

Feature maps are channel-first ``[C, H, W]``; token sequences are ``[L, C]``.
All arrays are C-contiguous float64, so element ``(i, j, k)`` of a ``[C, H, W]``
map sits at flat offset ``(i*H + j)*W + k``.  Every operation is a pure
function: same inputs give bit-identical outputs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float64

# Dense value carrier used throughout the package.
Tensor = np.ndarray


class ShapeError(ValueError):
    """Raised when operand extents do not satisfy an operation's contract."""


def as_tensor(values, shape=None) -> Tensor:
    """Return ``values`` as a C-contiguous float64 array, optionally reshaped."""
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the trailing feature axis.

    ``x`` is ``[L, Cin]``, ``weight`` is ``[Cout, Cin]``, ``bias`` is ``[Cout]``;
    returns ``[L, Cout]`` with ``y[l, o] = sum_i weight[o, i] * x[l, i] + bias[o]``.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"linear: x {tuple(x.shape)} incompatible with weight {tuple(weight.shape)}"
        )
    y = x @ weight.T
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ShapeError(
                f"linear: bias {tuple(bias.shape)} incompatible with weight "
                f"{tuple(weight.shape)}"
            )
        y = y + bias
    return y


def conv2d(
    x: Tensor,
    kernels: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """2D cross-correlation of ``x`` ``[Cin, H, W]`` with ``kernels``
    ``[Cout, Cin/groups, kh, kw]``.

    ``groups == Cin`` with ``Cout == Cin`` gives a depthwise convolution.
    Kernels are not flipped.
    """
    if x.ndim != 3 or kernels.ndim != 4:
        raise ShapeError(
            f"conv2d: expected [Cin,H,W] and [Cout,Cin/groups,kh,kw], got "
            f"{tuple(x.shape)} and {tuple(kernels.shape)}"
        )
    c_in, h, w = x.shape
    c_out, c_per_group, kh, kw = kernels.shape
    if c_in % groups != 0 or c_out % groups != 0:
        raise ShapeError(
            f"conv2d: channels ({c_in} in, {c_out} out) not divisible by groups={groups}"
        )
    if c_per_group != c_in // groups:
        raise ShapeError(
            f"conv2d: kernels {tuple(kernels.shape)} expect {c_per_group * groups} "
            f"input channels, x has {c_in}"
        )
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(
            f"conv2d: output extent {h_out}x{w_out} < 1 for input {tuple(x.shape)}, "
            f"kernel {kh}x{kw}, stride {stride}, padding {padding}"
        )

    if padding > 0:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]

    if groups == c_in and c_out == c_in:
        # depthwise fast path: one kernel per channel
        out = np.einsum("chwkl,ckl->chw", windows, kernels[:, 0], optimize=True)
    else:
        out = np.empty((c_out, h_out, w_out), dtype=DTYPE)
        out_per_group = c_out // groups
        for g in range(groups):
            xg = windows[g * c_per_group : (g + 1) * c_per_group]
            kg = kernels[g * out_per_group : (g + 1) * out_per_group]
            out[g * out_per_group : (g + 1) * out_per_group] = np.einsum(
                "ihwkl,oikl->ohw", xg, kg, optimize=True
            )
    if bias is not None:
        out = out + bias[:, None, None]
    return np.ascontiguousarray(out)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each token of ``x`` ``[L, C]`` to zero mean / unit variance over
    the channel axis, then apply the affine ``gamma``/``beta``.

    The eps in the denominator doubles as the zero-variance guard: a constant
    token row maps to ``beta``.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm: x {tuple(x.shape)} with gamma {tuple(gamma.shape)}, "
            f"beta {tuple(beta.shape)}"
        )
    if eps <= 0:
        raise ValueError("layer_norm: eps must be > 0")
    mu = x.mean(axis=1, keepdims=True)
    var = np.square(x - mu).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, overflow-safe on both tails."""
    out = np.empty_like(x, dtype=DTYPE)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.reshape(np.shape(x))


def silu(x: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    return x * sigmoid(x)


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), switching to the identity for x > 30 where the two are
    equal to double precision."""
    x = np.asarray(x, dtype=DTYPE)
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


_ACTIVATIONS = {"silu": silu, "sigmoid": sigmoid, "softplus": softplus, "relu": relu}


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementwise activation selected by name."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def _upsample_axis_x2(x: Tensor, axis: int) -> Tensor:
    n = x.shape[axis]
    pos = (np.arange(2 * n, dtype=DTYPE) + 0.5) / 2.0 - 0.5
    base = np.floor(pos)
    frac = pos - base
    i0 = np.clip(base.astype(np.int64), 0, n - 1)
    i1 = np.clip(base.astype(np.int64) + 1, 0, n - 1)
    lo = np.take(x, i0, axis=axis)
    hi = np.take(x, i1, axis=axis)
    fshape = [1] * x.ndim
    fshape[axis] = 2 * n
    f = frac.reshape(fshape)
    # lo + f*(hi - lo) keeps constant inputs bit-exactly constant
    return lo + f * (hi - lo)


def upsample_bilinear_x2(x: Tensor) -> Tensor:
    """Double both spatial extents of ``x`` ``[C, H, W]`` by bilinear
    interpolation with half-pixel (align-corners-false) sampling."""
    if x.ndim != 3:
        raise ShapeError(f"upsample_bilinear_x2: expected [C,H,W], got {tuple(x.shape)}")
    return np.ascontiguousarray(_upsample_axis_x2(_upsample_axis_x2(x, 1), 2))


def concat_channels(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    """Concatenate ``a`` and ``b`` along the channel ``axis``; all other extents
    must match.  ``a`` occupies the leading channels."""
    if a.ndim != b.ndim:
        raise ShapeError(
            f"concat_channels: rank mismatch {tuple(a.shape)} vs {tuple(b.shape)}"
        )
    for ax in range(a.ndim):
        if ax != (axis % a.ndim) and a.shape[ax] != b.shape[ax]:
            raise ShapeError(
                f"concat_channels: non-channel extents differ: {tuple(a.shape)} vs "
                f"{tuple(b.shape)}"
            )
    return np.concatenate([a, b], axis=axis)
