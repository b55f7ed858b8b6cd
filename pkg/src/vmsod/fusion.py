"""Cross-modal fusion of RGB and depth token features.

Each stage fuses the two modality streams at matching resolution.  Three
parallel branches share one structure (norm -> linear -> causal depthwise
1D conv -> silu -> selective scan): one enhances the RGB tokens, one the depth
tokens, and one models the joint stream formed by channel concatenation.  The
joint branch output, passed through the configured gate activation, gates both
enhanced streams; the gated sum rejoins the raw residual and a depthwise 3x3
conv produces the image-like fused map.

The joint branch treats its two input halves symmetrically: normalization
statistics and the input projection are evaluated half by half and combined
with commutative additions, so swapping the modalities together with the
matching weight permutation gives a bit-identical result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ss2d import tokens_to_grid
from .ssm import SelectiveSsmParams, init_selective_params, selective_scan
from .tensor import DTYPE, ShapeError, Tensor, silu
from .weights import (
    Conv2dWeights,
    LayerNormWeights,
    LinearWeights,
    init_conv2d,
    init_layer_norm,
    init_linear,
)

LN_EPS = 1e-5

GATE_ACTIVATIONS = ("silu", "none")


@dataclass(frozen=True)
class Conv1dWeights:
    """Depthwise kernel-3 convolution over the token axis, causally padded."""

    kernels: Tensor  # [C, 3]
    bias: Tensor  # [C]


@dataclass(frozen=True)
class CmmBranchWeights:
    ln: LayerNormWeights  # width Cin (C, or 2C for the joint branch)
    mlp: LinearWeights  # Cin -> C
    conv1: Conv1dWeights  # depthwise at C
    scan: SelectiveSsmParams  # width C


@dataclass(frozen=True)
class CmmWeights:
    rgb: CmmBranchWeights
    depth: CmmBranchWeights
    inter: CmmBranchWeights  # input width 2C, output width C
    out_mlp: LinearWeights  # C -> C
    dw_conv: Conv2dWeights  # depthwise 3x3 at C


def init_cmm(rng: np.random.Generator, channels: int, state_dim: int = 16) -> CmmWeights:
    def branch(in_width: int) -> CmmBranchWeights:
        return CmmBranchWeights(
            ln=init_layer_norm(in_width),
            mlp=init_linear(rng, channels, in_width),
            conv1=Conv1dWeights(
                kernels=rng.normal(0.0, 0.02, size=(channels, 3)),
                bias=np.zeros(channels, dtype=DTYPE),
            ),
            scan=init_selective_params(rng, channels, state_dim),
        )

    return CmmWeights(
        rgb=branch(channels),
        depth=branch(channels),
        inter=branch(2 * channels),
        out_mlp=init_linear(rng, channels, channels),
        dw_conv=init_conv2d(rng, channels, 1, 3),
    )


def causal_conv1d(x: Tensor, w: Conv1dWeights) -> Tensor:
    """Depthwise convolution of ``x`` [N, C] along the token axis; output token
    t sees tokens t-2..t (left zero padding)."""
    if x.shape[1] != w.kernels.shape[0]:
        raise ShapeError(
            f"causal_conv1d: {x.shape[1]} channels vs kernels for {w.kernels.shape[0]}"
        )
    padded = np.pad(x, ((w.kernels.shape[1] - 1, 0), (0, 0)))
    windows = sliding_window_view(padded, w.kernels.shape[1], axis=0)  # [N, C, k]
    return np.einsum("tck,ck->tc", windows, w.kernels, optimize=True) + w.bias


def self_enhance(tokens: Tensor, w: CmmBranchWeights) -> Tensor:
    """Single-modality enhancement: norm, project, local causal mixing, scan."""
    x = w.mlp(w.ln(tokens))
    x = silu(causal_conv1d(x, w.conv1))
    return selective_scan(w.scan, x)


def _joint_project(f_rgb: Tensor, f_depth: Tensor, w: CmmBranchWeights) -> Tensor:
    """Normalize the concatenated 2C-channel stream and project it to C.

    Statistics and the projection are accumulated half by half so that the two
    halves commute: swapping inputs along with the gamma/beta/weight halves is
    bit-exact.
    """
    if f_rgb.shape != f_depth.shape:
        raise ShapeError(
            f"joint branch: inputs {tuple(f_rgb.shape)} vs {tuple(f_depth.shape)} differ"
        )
    c = f_rgb.shape[1]
    if w.mlp.weight.shape[1] != 2 * c or w.ln.gamma.shape[0] != 2 * c:
        raise ShapeError(
            f"joint branch: weights sized for {w.mlp.weight.shape[1]} channels, "
            f"inputs give {2 * c}"
        )
    mu = (f_rgb.sum(axis=1) + f_depth.sum(axis=1)) / (2 * c)
    dev_r = f_rgb - mu[:, None]
    dev_d = f_depth - mu[:, None]
    var = (np.square(dev_r).sum(axis=1) + np.square(dev_d).sum(axis=1)) / (2 * c)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    x_r = dev_r * inv[:, None] * w.ln.gamma[:c] + w.ln.beta[:c]
    x_d = dev_d * inv[:, None] * w.ln.gamma[c:] + w.ln.beta[c:]
    return (x_r @ w.mlp.weight[:, :c].T + x_d @ w.mlp.weight[:, c:].T) + w.mlp.bias


def inter_modal_gate(
    f_rgb: Tensor,
    f_depth: Tensor,
    w: CmmBranchWeights,
    gate_activation: str = "silu",
) -> Tensor:
    """Joint-stream gate over both modalities: the concatenated tokens run the
    shared branch structure and the result passes the gate activation."""
    if gate_activation not in GATE_ACTIVATIONS:
        raise ValueError(f"gate_activation must be one of {GATE_ACTIVATIONS}")
    x = _joint_project(f_rgb, f_depth, w)
    x = silu(causal_conv1d(x, w.conv1))
    g = selective_scan(w.scan, x)
    return silu(g) if gate_activation == "silu" else g


def cmm_fuse(
    f_rgb: Tensor,
    f_depth: Tensor,
    w: CmmWeights,
    height: int,
    width: int,
    gate_activation: str = "silu",
) -> Tensor:
    """Fuse token features [N, C] of both modalities into an image-like map
    [C, H, W] (N = H*W, row-major-forward token order)."""
    if f_rgb.shape != f_depth.shape:
        raise ShapeError(
            f"cmm_fuse: inputs {tuple(f_rgb.shape)} vs {tuple(f_depth.shape)} differ"
        )
    if f_rgb.shape[0] != height * width:
        raise ShapeError(
            f"cmm_fuse: {f_rgb.shape[0]} tokens do not fill a {height}x{width} grid"
        )
    y_r = self_enhance(f_rgb, w.rgb)
    y_d = self_enhance(f_depth, w.depth)
    gate = inter_modal_gate(f_rgb, f_depth, w.inter, gate_activation)
    residual = f_rgb + f_depth
    fused = w.out_mlp(y_r * gate + y_d * gate) + residual
    grid = tokens_to_grid(fused, height, width)
    return w.dw_conv(grid, padding=1, groups=grid.shape[0])
