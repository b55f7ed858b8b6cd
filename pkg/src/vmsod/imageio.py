"""Binary PPM/PGM image I/O and nearest-neighbor resizing.

Only 8-bit binary variants are supported: P6 (RGB) and P5 (grayscale) with
maxval 255.  Pixel values map to [0, 1] as v/255 on load and back as
round-half-up(255*p) on save, so an 8-bit map round-trips bit-exactly and a
continuous map round-trips within 1/510 per pixel.
"""

from __future__ import annotations

import numpy as np

from .tensor import DTYPE, Tensor


class ImageFormatError(ValueError):
    """Malformed or unsupported image file; ``code`` is machine-parsable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _parse_header(data: bytes, path) -> tuple[bytes, int, int, int, int]:
    """Return (magic, width, height, maxval, payload_offset)."""
    if len(data) < 2 or data[:1] != b"P":
        raise ImageFormatError("bad-magic", f"{path}: not a PNM file")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError("bad-magic", f"{path}: unsupported magic {magic!r}")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(data):
            raise ImageFormatError("bad-header", f"{path}: header ended early")
        ch = data[pos : pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise ImageFormatError("bad-header", f"{path}: unexpected byte {ch!r} in header")
    if pos >= len(data) or data[pos : pos + 1] not in b" \t\r\n":
        raise ImageFormatError("bad-header", f"{path}: missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageFormatError("bad-header", f"{path}: degenerate extent {width}x{height}")
    if maxval != 255:
        raise ImageFormatError("unsupported-maxval", f"{path}: maxval {maxval}, need 255")
    return magic, width, height, maxval, pos


def load_image(path, kind: str) -> Tensor:
    """Load ``kind`` in {'rgb', 'gray'} as [3, H, W] or [1, H, W] in [0, 1]."""
    if kind not in ("rgb", "gray"):
        raise ValueError(f"load_image: kind must be rgb or gray, got {kind!r}")
    data = open(path, "rb").read()
    magic, width, height, _, offset = _parse_header(data, path)
    expected_magic = b"P6" if kind == "rgb" else b"P5"
    if magic != expected_magic:
        raise ImageFormatError(
            "bad-magic", f"{path}: expected {expected_magic.decode()} for {kind}, got {magic.decode()}"
        )
    channels = 3 if kind == "rgb" else 1
    payload = data[offset : offset + width * height * channels]
    if len(payload) < width * height * channels:
        raise ImageFormatError(
            "truncated", f"{path}: payload {len(payload)} bytes, need {width * height * channels}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).astype(DTYPE) / 255.0
    return np.ascontiguousarray(raw.reshape(height, width, channels).transpose(2, 0, 1))


def _quantize(values: Tensor) -> Tensor:
    # round half up, saturating
    return np.clip(np.floor(255.0 * values + 0.5), 0, 255).astype(np.uint8)


def save_saliency(pred: Tensor, path) -> None:
    """Write a [1, H, W] or [H, W] map with values in [0, 1] as binary PGM."""
    plane = pred[0] if pred.ndim == 3 else pred
    height, width = plane.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode())
        fh.write(_quantize(plane).tobytes())


def save_rgb(img: Tensor, path) -> None:
    """Write a [3, H, W] image with values in [0, 1] as binary PPM."""
    _, height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode())
        fh.write(_quantize(img.transpose(1, 2, 0)).tobytes())


def resize_nearest(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Nearest-neighbor resample of [C, H, W] using pixel-center mapping."""
    _, h, w = x.shape
    rows = np.minimum(((np.arange(out_h) + 0.5) * h / out_h).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * w / out_w).astype(np.int64), w - 1)
    return np.ascontiguousarray(x[:, rows[:, None], cols[None, :]])
