"""Full-network assembly: dual encoder, per-stage fusion, decoder.

One seed initializes every learnable parameter through a single generator, so
(seed, preset) fully determines the network.  Inference runs both encoder
streams, fuses each pyramid level into an image-like RGB-D map, and decodes a
full-resolution saliency probability map per supervision level.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .backbone import BackboneWeights, dual_encode, init_backbone
from .config import PresetSpec
from .decoder import DecoderWeights, decode, init_decoder
from .fusion import CmmWeights, cmm_fuse, init_cmm
from .ss2d import grid_to_tokens
from .tensor import Tensor
from .weights import named_arrays, parameter_count


@dataclass(frozen=True)
class NetworkWeights:
    rgb: BackboneWeights
    depth: BackboneWeights
    fusion: tuple[CmmWeights, ...]
    decoder: DecoderWeights


@dataclass(frozen=True)
class InferenceResult:
    preds: list[Tensor]  # five [1, H, W] maps in (0, 1), finest level first
    final: Tensor  # [1, H, W]
    stage_shapes: list[tuple[int, int, int]]  # fused [C, H, W] per stage
    seconds: float


def init_network(preset: PresetSpec, seed: int) -> NetworkWeights:
    rng = np.random.default_rng(seed)
    rgb = init_backbone(rng, preset.backbone_config(3))
    depth = init_backbone(rng, preset.backbone_config(1))
    fusion = tuple(init_cmm(rng, c, preset.state_dim) for c in preset.stage_channels)
    decoder = init_decoder(rng, preset.stage_channels)
    return NetworkWeights(rgb=rgb, depth=depth, fusion=fusion, decoder=decoder)


def infer(
    weights: NetworkWeights,
    preset: PresetSpec,
    rgb: Tensor,
    depth: Tensor,
    gate_activation: str = "silu",
) -> InferenceResult:
    start = time.perf_counter()
    pyr_rgb, pyr_depth = dual_encode(
        rgb,
        depth,
        preset.backbone_config(3),
        preset.backbone_config(1),
        weights.rgb,
        weights.depth,
    )
    fused = []
    for f_r, f_d, w in zip(pyr_rgb, pyr_depth, weights.fusion):
        _, h, wid = f_r.shape
        fused.append(
            cmm_fuse(grid_to_tokens(f_r), grid_to_tokens(f_d), w, h, wid, gate_activation)
        )
    preds, final = decode(fused, weights.decoder)
    return InferenceResult(
        preds=preds,
        final=final,
        stage_shapes=[tuple(f.shape) for f in fused],
        seconds=time.perf_counter() - start,
    )


def parameter_breakdown(weights: NetworkWeights) -> dict[str, int]:
    """Learnable-parameter counts per module and in total."""
    counts = {
        "rgb_encoder": parameter_count(weights.rgb),
        "depth_encoder": parameter_count(weights.depth),
        "fusion": parameter_count(weights.fusion),
        "decoder": parameter_count(weights.decoder),
    }
    counts["total"] = sum(counts.values())
    return counts


def network_named_arrays(weights: NetworkWeights):
    return named_arrays(weights)
