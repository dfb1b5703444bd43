"""End-to-end encoding: color conversion, padding, per-channel refinement,
serialization.  Decoding lives in :mod:`ajpeg.decoder`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bitstream import CompressedImage, records_from_leaves, serialize
from .decoder import decode
from .image import RasterImage, downsample_chroma, pad_to_pow2, rgb_to_ycbcr
from .refiner import Element, RefineResult, finest_mesh, run_adaptive
from .transform import QUANT_MATRIX

__all__ = ["EncodeConfig", "ChannelStats", "EncodeResult", "encode", "decode", "worker_count"]

CHANNEL_NAMES = ("Y", "Cb", "Cr")

# Padded frames never drop below 16 so the half-size chroma planes can
# still hold an 8x8 coefficient block.
MIN_FRAME = 16


def worker_count() -> int:
    """Parallelism cap: the AJPEG_THREADS environment variable, default 3."""
    raw = os.environ.get("AJPEG_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n else 3


@dataclass(frozen=True)
class EncodeConfig:
    """Encoder settings.  The chroma tolerance defaults to twice the luma
    tolerance, mirroring the coarser treatment color channels usually get."""

    tolerance: float
    chroma_tolerance: float | None = None
    norm_kind: str = "l2"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.chroma_tolerance is not None and not self.chroma_tolerance > 0:
            raise ValueError("chroma tolerance must be positive")

    @property
    def chroma(self) -> float:
        return 2.0 * self.tolerance if self.chroma_tolerance is None else self.chroma_tolerance


@dataclass
class ChannelStats:
    """Per-channel outcome of the refinement, for reporting and tests."""

    name: str
    elements: list[Element]
    error_unquantized: float
    error_quantized: float
    iterations: int
    terminated_by: str


@dataclass
class EncodeResult:
    data: bytes
    compressed: CompressedImage
    channels: list[ChannelStats] = field(default_factory=list)

    @property
    def byte_size(self) -> int:
        return len(self.data)

    @property
    def element_counts(self) -> tuple[int, int, int]:
        return tuple(len(ch.elements) for ch in self.channels)


def _refine_channel(values, tolerance, norm_kind, quant, uniform) -> RefineResult:
    if uniform:
        return finest_mesh(values, norm_kind, quant)
    return run_adaptive(values, tolerance, norm_kind, quant)


def encode(
    img: RasterImage,
    tolerance: float,
    chroma_tolerance: float | None = None,
    norm_kind: str = "l2",
    quant: np.ndarray = QUANT_MATRIX,
    uniform: bool = False,
    threads: int | None = None,
) -> EncodeResult:
    """Compress an image, returning the byte stream and per-channel stats.

    ``uniform=True`` skips adaptation and uses the fully refined mesh (the
    fixed-grid baseline) with the identical storage path.
    """
    config = EncodeConfig(tolerance, chroma_tolerance, norm_kind)
    y, cb, cr = rgb_to_ycbcr(img)
    y_pad = pad_to_pow2(y.values, MIN_FRAME)
    planes = [
        y_pad,
        downsample_chroma(pad_to_pow2(cb.values, MIN_FRAME)),
        downsample_chroma(pad_to_pow2(cr.values, MIN_FRAME)),
    ]
    tolerances = [config.tolerance, config.chroma, config.chroma]

    jobs = [(plane.values, tol) for plane, tol in zip(planes, tolerances)]
    workers = threads if threads is not None else worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 3)) as pool:
            results = list(
                pool.map(lambda j: _refine_channel(j[0], j[1], norm_kind, quant, uniform), jobs)
            )
    else:
        results = [_refine_channel(v, t, norm_kind, quant, uniform) for v, t in jobs]

    ci = CompressedImage(
        padded_height=y_pad.height,
        padded_width=y_pad.width,
        orig_height=y_pad.orig_height,
        orig_width=y_pad.orig_width,
        norm_kind=norm_kind,
    )
    stats: list[ChannelStats] = []
    for index, (name, plane, result) in enumerate(zip(CHANNEL_NAMES, planes, results)):
        leaves = [(leaf.element, leaf.coeffs) for leaf in result.leaves]
        ci.channels[index].extend(records_from_leaves(leaves, plane.height, plane.width))
        ordered = sorted((leaf.element for leaf in result.leaves), key=lambda e: (e.top, e.left))
        stats.append(
            ChannelStats(
                name=name,
                elements=ordered,
                error_unquantized=result.error_unquantized,
                error_quantized=result.error_quantized,
                iterations=result.iterations,
                terminated_by=result.terminated_by,
            )
        )
    return EncodeResult(data=serialize(ci), compressed=ci, channels=stats)
