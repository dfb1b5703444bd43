"""Image comparison metrics: weighted L2, BV error, PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import local_error_bv
from .image import RasterImage


@dataclass
class Metrics:
    """Distortion between two images, plus optional encoder-side facts."""

    l2_error: float
    bv_error: float
    psnr: float
    element_counts: tuple[int, int, int] | None = None
    compressed_size: int | None = None


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-range samples.

    Returns ``inf`` when the inputs are identical.
    """
    mse = float(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def compare(a: RasterImage, b: RasterImage) -> Metrics:
    """All metric fields between two images of equal dimensions.

    The weighted L2 error is the RMS deviation per sample (channels
    averaged); the BV error is computed per channel on the full frame and
    averaged over the channels.
    """
    if a.samples.shape != b.samples.shape:
        raise ValueError(f"image shapes differ: {a.samples.shape} vs {b.samples.shape}")
    diff = a.samples - b.samples
    l2 = math.sqrt(float(np.mean(diff * diff)))
    frame_pixels = a.height * a.width
    bv = float(
        np.mean(
            [
                local_error_bv(a.samples[:, :, c], b.samples[:, :, c], frame_pixels)
                for c in range(3)
            ]
        )
    )
    return Metrics(l2_error=l2, bv_error=bv, psnr=psnr(a.samples, b.samples))
