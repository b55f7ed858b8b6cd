"""Deterministic synthetic RGB-D scenes with ground truth.

A scene plants one to three solid shapes (rectangles or ellipses) on a textured
background.  The depth channel encodes the usual layout cue: objects sit near
the camera at an almost constant low value while the background recedes along a
gradient.  The same seed always yields a bit-identical scene, and the mask is
binary and non-empty by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE, Tensor


@dataclass(frozen=True)
class SaliencyPair:
    rgb: Tensor  # [3, H, W] in [0, 1]
    depth: Tensor  # [1, H, W] in [0, 1]
    gt: Tensor | None  # [H, W] binary


def synth_scene(seed: int, height: int, width: int) -> SaliencyPair:
    if height % 32 or width % 32:
        raise ValueError(f"synth_scene: extents {height}x{width} must be divisible by 32")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(DTYPE)

    gt = np.zeros((height, width), dtype=DTYPE)
    object_mask_colors = []
    for _ in range(int(rng.integers(1, 4))):
        cy = rng.uniform(0.25 * height, 0.75 * height)
        cx = rng.uniform(0.25 * width, 0.75 * width)
        hy = rng.uniform(height / 10, height / 4)
        hx = rng.uniform(width / 10, width / 4)
        if rng.uniform() < 0.5:
            mask = (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
        else:
            mask = ((yy - cy) / hy) ** 2 + ((xx - cx) / hx) ** 2 <= 1.0
        gt[mask] = 1.0
        object_mask_colors.append((mask, rng.uniform(0.2, 0.9, size=3)))

    # background: smooth diagonal shading plus a sinusoidal weave and grain
    base = 0.35 + 0.25 * (xx / width + yy / height) / 2
    weave = 0.08 * np.sin(2 * np.pi * xx / 16) * np.cos(2 * np.pi * yy / 16)
    rgb = np.stack([base + weave] * 3)
    rgb[1] *= 0.9
    rgb[2] *= 1.1
    for mask, color in object_mask_colors:
        rgb[:, mask] = color[:, None]
    rgb += rng.normal(0.0, 0.02, size=rgb.shape)

    depth_bg = 0.55 + 0.4 * yy / height
    depth = np.where(gt > 0, rng.uniform(0.08, 0.25), depth_bg)[None]
    depth = depth + rng.normal(0.0, 0.01, size=depth.shape)

    return SaliencyPair(
        rgb=np.clip(rgb, 0.0, 1.0),
        depth=np.clip(depth, 0.0, 1.0),
        gt=gt,
    )
