"""Top-down refinement decoder and saliency prediction heads.

The coarsest fused map seeds the cascade; each refinement step upsamples the
coarser feature, aligns its channels with a 1x1 lateral conv, and combines it
with the finer stage through a multiplicative branch and a concatenate-reduce
branch.  A 1x1 head, bilinear upsampling to the input resolution, and a sigmoid
turn every level into a full-resolution saliency probability map; one extra
head reads the coarsest map before refinement, for five supervision levels in
total.  The finest-level map is the final prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, concat_channels, relu, sigmoid, upsample_bilinear_x2
from .weights import Conv2dWeights, init_conv2d


@dataclass(frozen=True)
class MrStageWeights:
    lateral: Conv2dWeights  # 1x1, C_{i+1} -> C_i, applied after upsampling
    reduce: Conv2dWeights  # 1x1, 2*C_i -> C_i
    merge: Conv2dWeights  # 3x3, C_i -> C_i
    final: Conv2dWeights  # 1x1, C_i -> C_i


@dataclass(frozen=True)
class HeadWeights:
    conv: Conv2dWeights  # 1x1, C_i -> 1


@dataclass(frozen=True)
class DecoderWeights:
    refine: tuple[MrStageWeights, ...]  # one per level below the coarsest
    heads: tuple[HeadWeights, ...]  # one per level plus the pre-refinement extra


def init_decoder(rng: np.random.Generator, stage_channels: tuple[int, ...]) -> DecoderWeights:
    refine = tuple(
        MrStageWeights(
            lateral=init_conv2d(rng, c, 2 * c, 1),
            reduce=init_conv2d(rng, c, 2 * c, 1),
            merge=init_conv2d(rng, c, c, 3),
            final=init_conv2d(rng, c, c, 1),
        )
        for c in stage_channels[:-1]
    )
    head_channels = list(stage_channels) + [stage_channels[-1]]
    heads = tuple(HeadWeights(conv=init_conv2d(rng, 1, c, 1)) for c in head_channels)
    return DecoderWeights(refine=refine, heads=heads)


def mr_refine(f_coarse: Tensor, f_fine: Tensor, w: MrStageWeights) -> Tensor:
    """Refine ``f_fine`` [C, 2h, 2w] with the coarser ``f_coarse`` [2C, h, w]."""
    up = w.lateral(upsample_bilinear_x2(f_coarse))
    if up.shape != f_fine.shape:
        raise ShapeError(
            f"mr_refine: upsampled coarse {tuple(up.shape)} vs fine {tuple(f_fine.shape)}"
        )
    mul_branch = up * f_fine
    cat_branch = w.reduce(concat_channels(up, f_fine))
    return w.final(relu(w.merge(mul_branch + cat_branch, padding=1)))


def _head(feature: Tensor, w: HeadWeights, full_height: int, full_width: int) -> Tensor:
    p = w.conv(feature)
    while p.shape[1] < full_height:
        p = upsample_bilinear_x2(p)
    if p.shape != (1, full_height, full_width):
        raise ShapeError(
            f"head: reached {tuple(p.shape)}, wanted (1, {full_height}, {full_width})"
        )
    return sigmoid(p)


def decode(fused: list[Tensor], w: DecoderWeights) -> tuple[list[Tensor], Tensor]:
    """Aggregate the fused pyramid top-down and emit all supervision maps.

    Returns (predictions, final): predictions hold one full-resolution map in
    (0, 1) per refined level (finest first) plus the pre-refinement extra from
    the coarsest level; final is the finest-level map.
    """
    levels = len(w.refine) + 1
    if len(fused) != levels:
        raise ShapeError(f"decode: expected {levels} fused stages, got {len(fused)}")
    full_h = fused[0].shape[1] * 4
    full_w = fused[0].shape[2] * 4

    refined = [None] * levels
    refined[-1] = fused[-1]
    for i in range(levels - 2, -1, -1):
        refined[i] = mr_refine(refined[i + 1], fused[i], w.refine[i])

    preds = [_head(refined[i], w.heads[i], full_h, full_w) for i in range(levels)]
    preds.append(_head(fused[-1], w.heads[levels], full_h, full_w))
    return preds, preds[0]
