"""Learnable-parameter containers, seeded initialization helpers, and the flat
binary weight format.

Weight objects are frozen dataclasses whose leaves are float64 arrays.  They
serialize to a binary blob of little-endian float64 values plus a text
manifest (one ``name shape byte-offset`` line per array); the roundtrip is
bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path

import numpy as np

from .tensor import DTYPE, Tensor, conv2d, layer_norm, linear

INIT_STD = 0.02


@dataclass(frozen=True)
class LinearWeights:
    weight: Tensor  # [out, in]
    bias: Tensor  # [out]

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


@dataclass(frozen=True)
class LayerNormWeights:
    gamma: Tensor
    beta: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


@dataclass(frozen=True)
class Conv2dWeights:
    kernels: Tensor  # [out, in/groups, kh, kw]
    bias: Tensor  # [out]

    def __call__(self, x: Tensor, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
        return conv2d(x, self.kernels, self.bias, stride=stride, padding=padding, groups=groups)


def init_linear(rng: np.random.Generator, out_dim: int, in_dim: int, std: float = INIT_STD) -> LinearWeights:
    return LinearWeights(
        weight=rng.normal(0.0, std, size=(out_dim, in_dim)),
        bias=np.zeros(out_dim, dtype=DTYPE),
    )


def init_layer_norm(dim: int) -> LayerNormWeights:
    return LayerNormWeights(gamma=np.ones(dim, dtype=DTYPE), beta=np.zeros(dim, dtype=DTYPE))


def init_conv2d(
    rng: np.random.Generator,
    out_channels: int,
    in_per_group: int,
    kernel: int,
    std: float = INIT_STD,
) -> Conv2dWeights:
    return Conv2dWeights(
        kernels=rng.normal(0.0, std, size=(out_channels, in_per_group, kernel, kernel)),
        bias=np.zeros(out_channels, dtype=DTYPE),
    )


def named_arrays(obj, prefix: str = ""):
    """Walk a weight tree (dataclasses, tuples/lists, arrays) in declaration
    order, yielding ``(dotted_name, array)`` pairs."""
    if obj is None:
        return
    if isinstance(obj, np.ndarray):
        yield prefix, obj
        return
    if is_dataclass(obj):
        for f in fields(obj):
            name = f"{prefix}.{f.name}" if prefix else f.name
            yield from named_arrays(getattr(obj, f.name), name)
        return
    if isinstance(obj, (tuple, list)):
        for i, item in enumerate(obj):
            name = f"{prefix}.{i}" if prefix else str(i)
            yield from named_arrays(item, name)
        return
    raise TypeError(f"named_arrays: unsupported node {type(obj).__name__} at {prefix!r}")


def parameter_count(obj) -> int:
    return sum(arr.size for _, arr in named_arrays(obj))


def manifest_path(bin_path) -> Path:
    return Path(str(bin_path) + ".manifest")


def save_weights(obj, bin_path) -> None:
    """Write all arrays of a weight tree as one little-endian float64 blob plus
    a ``name shape byte-offset`` manifest alongside."""
    bin_path = Path(bin_path)
    entries = []
    offset = 0
    with open(bin_path, "wb") as blob:
        for name, arr in named_arrays(obj):
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            blob.write(data)
            shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
            entries.append(f"{name} {shape} {offset}")
            offset += len(data)
    manifest_path(bin_path).write_text("\n".join(entries) + "\n")


def load_weights(bin_path) -> dict[str, Tensor]:
    """Read a weight blob back into ``{name: array}`` per its manifest."""
    bin_path = Path(bin_path)
    blob = bin_path.read_bytes()
    out: dict[str, Tensor] = {}
    for line in manifest_path(bin_path).read_text().splitlines():
        if not line.strip():
            continue
        name, shape_txt, offset_txt = line.rsplit(" ", 2)
        shape = () if shape_txt == "scalar" else tuple(int(d) for d in shape_txt.split("x"))
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_txt)
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        out[name] = arr.astype(DTYPE)
    return out
