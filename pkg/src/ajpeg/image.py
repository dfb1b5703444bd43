"""Raster images: color conversion, chroma resampling, padding, file I/O.

Samples are float64 in [0, 1] everywhere; 8-bit quantization happens only
when reading or writing image files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Raised for unreadable or malformed image files."""


@dataclass(frozen=True)
class RasterImage:
    """An RGB image, samples shaped (height, width, 3) as float64 in [0, 1]."""

    samples: np.ndarray

    def __post_init__(self):
        s = self.samples
        if s.ndim != 3 or s.shape[2] != 3 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"expected (h, w, 3) samples, got shape {s.shape}")
        if s.dtype != np.float64:
            object.__setattr__(self, "samples", s.astype(np.float64))
        if self.samples.min() < 0.0 or self.samples.max() > 1.0:
            raise ValueError("samples outside [0, 1]")

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ChannelPlane:
    """One color component as a 2D grid of samples.

    ``orig_height``/``orig_width`` record the pre-padding extent so a padded
    plane can be cropped back after reconstruction.
    """

    values: np.ndarray
    orig_height: int = 0
    orig_width: int = 0

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"expected a 2D plane, got shape {v.shape}")
        if v.dtype != np.float64:
            object.__setattr__(self, "values", v.astype(np.float64))
        if self.orig_height <= 0:
            object.__setattr__(self, "orig_height", v.shape[0])
        if self.orig_width <= 0:
            object.__setattr__(self, "orig_width", v.shape[1])
        if self.orig_height > v.shape[0] or self.orig_width > v.shape[1]:
            raise ValueError("original extent exceeds plane size")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def rgb_to_ycbcr(img: RasterImage) -> tuple[ChannelPlane, ChannelPlane, ChannelPlane]:
    """Full-range BT.601 conversion; each output plane stays inside [0, 1]."""
    r = img.samples[:, :, 0]
    g = img.samples[:, :, 1]
    b = img.samples[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 0.5 + (b - y) / 1.772
    cr = 0.5 + (r - y) / 1.402
    return ChannelPlane(y), ChannelPlane(cb), ChannelPlane(cr)


def ycbcr_to_rgb(y: ChannelPlane, cb: ChannelPlane, cr: ChannelPlane) -> RasterImage:
    """Inverse of :func:`rgb_to_ycbcr`, clamped into [0, 1]."""
    if not (y.values.shape == cb.values.shape == cr.values.shape):
        raise ValueError(
            f"plane shapes differ: {y.values.shape}, {cb.values.shape}, {cr.values.shape}"
        )
    yv, cbv, crv = y.values, cb.values - 0.5, cr.values - 0.5
    r = yv + 1.402 * crv
    b = yv + 1.772 * cbv
    g = (yv - 0.299 * r - 0.114 * b) / 0.587
    rgb = np.stack([r, g, b], axis=2)
    return RasterImage(np.clip(rgb, 0.0, 1.0))


def downsample_chroma(plane: ChannelPlane) -> ChannelPlane:
    """Halve a plane by averaging disjoint 2x2 blocks.  Dimensions must be even."""
    v = plane.values
    if v.shape[0] % 2 or v.shape[1] % 2:
        raise ValueError(f"plane dimensions {v.shape} must be even")
    half = 0.25 * (v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2])
    return ChannelPlane(half, (plane.orig_height + 1) // 2, (plane.orig_width + 1) // 2)


def upsample_chroma(plane: ChannelPlane, target_height: int | None = None,
                    target_width: int | None = None) -> ChannelPlane:
    """Double a plane by pixel replication.

    If a target frame is given, doubled dimensions may not exceed it.
    """
    v = plane.values
    h2, w2 = 2 * v.shape[0], 2 * v.shape[1]
    if target_height is not None and h2 > target_height:
        raise ValueError(f"upsampled height {h2} exceeds target {target_height}")
    if target_width is not None and w2 > target_width:
        raise ValueError(f"upsampled width {w2} exceeds target {target_width}")
    up = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)
    return ChannelPlane(up, min(2 * plane.orig_height, h2), min(2 * plane.orig_width, w2))


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    if n < 1:
        raise ValueError("n must be positive")
    return 1 << (n - 1).bit_length()


def pad_to_pow2(values: np.ndarray | ChannelPlane, min_size: int = 1) -> ChannelPlane:
    """Pad a grid by edge replication until both dimensions are powers of two.

    ``min_size`` additionally forces each padded dimension to at least that
    value (the encoder uses 16 so that downsampled chroma planes still hold
    an 8x8 coefficient block).
    """
    if isinstance(values, ChannelPlane):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    ph = max(next_pow2(h), min_size)
    pw = max(next_pow2(w), min_size)
    if (ph, pw) == (h, w):
        return ChannelPlane(values.copy(), h, w)
    padded = np.pad(values, ((0, ph - h), (0, pw - w)), mode="edge")
    return ChannelPlane(padded, h, w)


def crop_to_orig(plane: ChannelPlane) -> np.ndarray:
    """Drop the padded margin, returning the original extent."""
    return plane.values[: plane.orig_height, : plane.orig_width].copy()


# ---------------------------------------------------------------------------
# File I/O


def read_ppm(path: str | Path) -> RasterImage:
    """Read a binary (P6) PPM file with 8-bit samples."""
    data = Path(path).read_bytes()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] not in (10, 13):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PPM header")
        return data[start:pos]

    magic = token()
    if magic != b"P6":
        raise ImageFormatError(f"{path}: not a binary PPM (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad PPM header") from exc
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    need = width * height * 3
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise ImageFormatError(f"{path}: expected {need} sample bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(arr.astype(np.float64) / maxval)


def write_ppm(img: RasterImage, path: str | Path) -> None:
    """Write a binary (P6) PPM file with maxval 255."""
    arr = np.clip(np.rint(img.samples * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_png(path: str | Path) -> RasterImage:
    """Read a PNG file (requires Pillow)."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError("PNG support requires Pillow (pip install ajpeg[png])") from exc
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return RasterImage(arr)


def write_png(img: RasterImage, path: str | Path) -> None:
    """Write a PNG file (requires Pillow)."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError("PNG support requires Pillow (pip install ajpeg[png])") from exc
    arr = np.clip(np.rint(img.samples * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def read_image(path: str | Path) -> RasterImage:
    """Read a PPM or PNG image, dispatching on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        return read_png(path)
    return read_ppm(path)


def write_image(img: RasterImage, path: str | Path) -> None:
    """Write a PPM or PNG image, dispatching on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        write_png(img, path)
    else:
        write_ppm(img, path)
