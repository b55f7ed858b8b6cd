"""Four-direction 2D selective scanning.

A feature map [C, H, W] is serialized into a token sequence along each of four
traversal orders, each sequence runs through its own selective scan, and the
four results are folded back onto the grid and summed.  Serialization and its
inverse are exact bijections, so the only mixing across positions happens
inside the scans.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .tensor import Tensor, ShapeError
from .ssm import SelectiveSsmParams, selective_scan


class ScanDirection(Enum):
    ROW_MAJOR_FORWARD = "row_fwd"  # l = h*W + w
    ROW_MAJOR_BACKWARD = "row_bwd"  # reverse of row-major order
    COL_MAJOR_FORWARD = "col_fwd"  # l = w*H + h
    COL_MAJOR_BACKWARD = "col_bwd"  # reverse of column-major order


# fixed merge order for deterministic summation
DIRECTIONS = (
    ScanDirection.ROW_MAJOR_FORWARD,
    ScanDirection.ROW_MAJOR_BACKWARD,
    ScanDirection.COL_MAJOR_FORWARD,
    ScanDirection.COL_MAJOR_BACKWARD,
)


def expand(x: Tensor, direction: ScanDirection) -> Tensor:
    """Serialize ``x`` [C, H, W] into a token sequence [H*W, C] following the
    direction's traversal order."""
    if x.ndim != 3:
        raise ShapeError(f"expand: expected [C,H,W], got {tuple(x.shape)}")
    c = x.shape[0]
    if direction in (ScanDirection.COL_MAJOR_FORWARD, ScanDirection.COL_MAJOR_BACKWARD):
        flat = x.transpose(0, 2, 1).reshape(c, -1)
    else:
        flat = x.reshape(c, -1)
    if direction in (ScanDirection.ROW_MAJOR_BACKWARD, ScanDirection.COL_MAJOR_BACKWARD):
        flat = flat[:, ::-1]
    return np.ascontiguousarray(flat.T)


def unexpand(seq: Tensor, direction: ScanDirection, height: int, width: int) -> Tensor:
    """Invert :func:`expand`: fold a token sequence [H*W, C] back into the grid
    [C, H, W] for the same direction."""
    if seq.ndim != 2 or seq.shape[0] != height * width:
        raise ShapeError(
            f"unexpand: sequence {tuple(seq.shape)} does not match grid "
            f"{height}x{width}"
        )
    flat = seq.T
    if direction in (ScanDirection.ROW_MAJOR_BACKWARD, ScanDirection.COL_MAJOR_BACKWARD):
        flat = flat[:, ::-1]
    c = seq.shape[1]
    if direction in (ScanDirection.COL_MAJOR_FORWARD, ScanDirection.COL_MAJOR_BACKWARD):
        grid = flat.reshape(c, width, height).transpose(0, 2, 1)
    else:
        grid = flat.reshape(c, height, width)
    return np.ascontiguousarray(grid)


def grid_to_tokens(x: Tensor) -> Tensor:
    """Row-major-forward serialization; the canonical token order used by the
    backbone blocks and fusion stages."""
    return expand(x, ScanDirection.ROW_MAJOR_FORWARD)


def tokens_to_grid(seq: Tensor, height: int, width: int) -> Tensor:
    return unexpand(seq, ScanDirection.ROW_MAJOR_FORWARD, height, width)


def ss2d(x: Tensor, params: tuple[SelectiveSsmParams, ...]) -> Tensor:
    """Scan ``x`` [C, H, W] along all four directions and merge by elementwise
    sum (fixed direction order)."""
    if len(params) != len(DIRECTIONS):
        raise ValueError(f"ss2d: expected {len(DIRECTIONS)} parameter sets, got {len(params)}")
    _, h, w = x.shape
    out = None
    for direction, p in zip(DIRECTIONS, params):
        y = unexpand(selective_scan(p, expand(x, direction)), direction, h, w)
        out = y if out is None else out + y
    return out
