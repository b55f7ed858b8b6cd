"""Hierarchical dual-stream encoder built from visual state-space blocks.

An image enters through a stride-4 patch embedding, then passes four stages of
token blocks; stages 2..4 each begin with a 2x2 patch merge that halves the
spatial extents and doubles the channels.  Each block mixes tokens in two
residual branches:

    branch 1: silu(depthwise3x3(linear(norm(z)))) -> four-direction scan
              -> linear(norm(.)), added back onto z
    branch 2: a two-layer feed-forward on the normalized result, added back

Tokens map to the grid in row-major-forward order throughout.  A full encode
returns the four per-stage feature maps (the feature pyramid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ss2d import grid_to_tokens, ss2d, tokens_to_grid
from .ssm import SelectiveSsmParams, init_selective_params
from .tensor import ShapeError, Tensor, silu
from .weights import (
    Conv2dWeights,
    LayerNormWeights,
    LinearWeights,
    init_conv2d,
    init_layer_norm,
    init_linear,
)


@dataclass(frozen=True)
class BackboneConfig:
    """Stage geometry of one encoder stream.

    ``stage_channels`` must double stage to stage; spatial extents shrink by
    ``patch_size`` at the stem and by 2 at each later stage, so inputs must be
    divisible by ``patch_size * 2**(num_stages - 1)`` (32 for the defaults).
    """

    in_channels: int
    stage_channels: tuple[int, ...] = (96, 192, 384, 768)
    blocks_per_stage: tuple[int, ...] = (2, 2, 9, 2)
    patch_size: int = 4
    state_dim: int = 16
    expand_ratio: int = 2
    ffn_ratio: int = 4

    def __post_init__(self):
        if len(self.stage_channels) != len(self.blocks_per_stage):
            raise ValueError("BackboneConfig: stage_channels and blocks_per_stage disagree")
        for a, b in zip(self.stage_channels, self.stage_channels[1:]):
            if b != 2 * a:
                raise ValueError(f"BackboneConfig: channels must double per stage, got {self.stage_channels}")

    @property
    def num_stages(self) -> int:
        return len(self.stage_channels)

    @property
    def total_reduction(self) -> int:
        return self.patch_size * 2 ** (self.num_stages - 1)


@dataclass(frozen=True)
class VmBlockWeights:
    ln1: LayerNormWeights  # width C
    in_proj: LinearWeights  # C -> C_e
    dw_conv: Conv2dWeights  # depthwise 3x3 at C_e
    ss2d_params: tuple[SelectiveSsmParams, ...]  # 4 directions at C_e
    ln2: LayerNormWeights  # width C_e
    out_proj: LinearWeights  # C_e -> C
    ln3: LayerNormWeights  # width C
    ffn_in: LinearWeights  # C -> ffn_ratio*C
    ffn_out: LinearWeights  # ffn_ratio*C -> C


@dataclass(frozen=True)
class PatchEmbedWeights:
    proj: Conv2dWeights  # [C1, Cin, p, p], applied at stride p
    ln: LayerNormWeights  # width C1


@dataclass(frozen=True)
class PatchMergeWeights:
    ln: LayerNormWeights  # width 4C
    reduce: LinearWeights  # 4C -> 2C


@dataclass(frozen=True)
class StageWeights:
    merge: PatchMergeWeights | None  # absent for the first stage
    blocks: tuple[VmBlockWeights, ...]


@dataclass(frozen=True)
class BackboneWeights:
    embed: PatchEmbedWeights
    stages: tuple[StageWeights, ...]


def init_vm_block(rng: np.random.Generator, channels: int, cfg: BackboneConfig) -> VmBlockWeights:
    inner = cfg.expand_ratio * channels
    hidden = cfg.ffn_ratio * channels
    return VmBlockWeights(
        ln1=init_layer_norm(channels),
        in_proj=init_linear(rng, inner, channels),
        dw_conv=init_conv2d(rng, inner, 1, 3),
        ss2d_params=tuple(init_selective_params(rng, inner, cfg.state_dim) for _ in range(4)),
        ln2=init_layer_norm(inner),
        out_proj=init_linear(rng, channels, inner),
        ln3=init_layer_norm(channels),
        ffn_in=init_linear(rng, hidden, channels),
        ffn_out=init_linear(rng, channels, hidden),
    )


def init_backbone(rng: np.random.Generator, cfg: BackboneConfig) -> BackboneWeights:
    c1 = cfg.stage_channels[0]
    embed = PatchEmbedWeights(
        proj=init_conv2d(rng, c1, cfg.in_channels, cfg.patch_size),
        ln=init_layer_norm(c1),
    )
    stages = []
    for i, channels in enumerate(cfg.stage_channels):
        merge = None
        if i > 0:
            prev = cfg.stage_channels[i - 1]
            merge = PatchMergeWeights(ln=init_layer_norm(4 * prev), reduce=init_linear(rng, 2 * prev, 4 * prev))
        blocks = tuple(init_vm_block(rng, channels, cfg) for _ in range(cfg.blocks_per_stage[i]))
        stages.append(StageWeights(merge=merge, blocks=blocks))
    return BackboneWeights(embed=embed, stages=tuple(stages))


def patch_partition(img: Tensor, w: PatchEmbedWeights, patch_size: int = 4) -> Tensor:
    """Embed non-overlapping ``patch_size`` x ``patch_size`` patches of
    ``img`` [Cin, H, W] into [C1, H/p, W/p], then layer-normalize channels."""
    _, h, wid = img.shape
    if h % patch_size or wid % patch_size:
        raise ShapeError(f"patch_partition: extents {h}x{wid} not divisible by {patch_size}")
    grid = w.proj(img, stride=patch_size)
    _, gh, gw = grid.shape
    tokens = w.ln(grid_to_tokens(grid))
    return tokens_to_grid(tokens, gh, gw)


def vm_block(z: Tensor, w: VmBlockWeights, height: int, width: int) -> Tensor:
    """One token block over ``z`` [L, C] with L = height*width."""
    if z.shape[0] != height * width:
        raise ShapeError(f"vm_block: {z.shape[0]} tokens do not fill a {height}x{width} grid")
    inner = w.in_proj.weight.shape[0]
    u = w.in_proj(w.ln1(z))
    grid = tokens_to_grid(u, height, width)
    grid = silu(w.dw_conv(grid, padding=1, groups=inner))
    grid = ss2d(grid, w.ss2d_params)
    z_prime = w.out_proj(w.ln2(grid_to_tokens(grid))) + z
    ffn = w.ffn_out(silu(w.ffn_in(w.ln3(z_prime))))
    return ffn + z_prime


def patch_merge(x: Tensor, w: PatchMergeWeights) -> Tensor:
    """Gather each 2x2 neighborhood of ``x`` [C, H, W] into 4C channels
    (quadrant order TL, TR, BL, BR), normalize, and reduce to [2C, H/2, W/2]."""
    c, h, wid = x.shape
    if h % 2 or wid % 2:
        raise ShapeError(f"patch_merge: extents {h}x{wid} must be even")
    gathered = np.concatenate(
        [x[:, 0::2, 0::2], x[:, 0::2, 1::2], x[:, 1::2, 0::2], x[:, 1::2, 1::2]], axis=0
    )
    tokens = w.reduce(w.ln(grid_to_tokens(gathered)))
    return tokens_to_grid(tokens, h // 2, wid // 2)


def encode(img: Tensor, cfg: BackboneConfig, weights: BackboneWeights) -> list[Tensor]:
    """Run one stream, returning the four stage outputs (channels
    ``stage_channels[i]`` at 1/4 .. 1/32 of the input extents)."""
    _, h, wid = img.shape
    if h % cfg.total_reduction or wid % cfg.total_reduction:
        raise ShapeError(
            f"encode: input {h}x{wid} not divisible by {cfg.total_reduction}"
        )
    x = patch_partition(img, weights.embed, cfg.patch_size)
    pyramid = []
    for stage in weights.stages:
        if stage.merge is not None:
            x = patch_merge(x, stage.merge)
        _, gh, gw = x.shape
        tokens = grid_to_tokens(x)
        for block in stage.blocks:
            tokens = vm_block(tokens, block, gh, gw)
        x = tokens_to_grid(tokens, gh, gw)
        pyramid.append(x)
    return pyramid


def dual_encode(
    rgb: Tensor,
    depth: Tensor,
    cfg_rgb: BackboneConfig,
    cfg_depth: BackboneConfig,
    w_rgb: BackboneWeights,
    w_depth: BackboneWeights,
) -> tuple[list[Tensor], list[Tensor]]:
    """Encode both modalities independently (no weight sharing); the two inputs
    must be spatially registered."""
    if rgb.shape[1:] != depth.shape[1:]:
        raise ShapeError(
            f"dual_encode: rgb {tuple(rgb.shape)} and depth {tuple(depth.shape)} "
            f"are not spatially aligned"
        )
    return encode(rgb, cfg_rgb, w_rgb), encode(depth, cfg_depth, w_depth)
