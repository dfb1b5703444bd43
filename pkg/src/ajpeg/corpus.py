"""Deterministic synthetic test images.

The set covers the codec's interesting regimes: flat content, smooth
ramps and band-limited waves (large elements win), hard-edged cartoon
shapes (local refinement wins), white noise (the mesh saturates at the
finest grid), and a single-coefficient construction whose refinement
behavior is deliberately adversarial: the block reproduces exactly on the
coarse element while its children leak energy outside their kept bands.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .image import RasterImage, write_ppm
from .transform import idct2


def constant_image(size: int = 64, rgb=(0.42, 0.55, 0.61)) -> RasterImage:
    samples = np.empty((size, size, 3))
    samples[:, :] = rgb
    return RasterImage(samples)


def gradient_image(size: int = 512) -> RasterImage:
    """Smooth linear ramps with slightly different slopes per channel."""
    y = np.linspace(0.0, 1.0, size)[:, None]
    x = np.linspace(0.0, 1.0, size)[None, :]
    r = 0.15 + 0.7 * (0.6 * y + 0.4 * x)
    g = 0.10 + 0.8 * (0.3 * y + 0.7 * x)
    b = 0.20 + 0.6 * (0.5 * y + 0.5 * x)
    return RasterImage(np.stack([r, g, b], axis=2))


def sines_image(size: int = 512) -> RasterImage:
    """Band-limited sinusoids; smooth but not polynomial."""
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    base = 0.5 + 0.2 * np.sin(2 * np.pi * 1.5 * xx) * np.cos(2 * np.pi * yy)
    r = base + 0.1 * np.sin(2 * np.pi * 2.5 * (xx + yy))
    g = base + 0.1 * np.cos(2 * np.pi * 2.0 * (xx - yy))
    b = base
    return RasterImage(np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0))


def cartoon_image(size: int = 256) -> RasterImage:
    """Piecewise-constant shapes with sharp edges."""
    samples = np.full((size, size, 3), 0.85)
    q = size // 4
    samples[q : 2 * q, q : 3 * q] = (0.2, 0.3, 0.7)
    samples[2 * q + q // 2 :, : q + q // 2] = (0.9, 0.55, 0.1)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    disk = (yy - 0.7 * size) ** 2 + (xx - 0.65 * size) ** 2 <= (0.18 * size) ** 2
    samples[disk] = (0.15, 0.6, 0.25)
    return RasterImage(samples)


def noise_image(size: int = 128, seed: int = 20) -> RasterImage:
    rng = np.random.default_rng(seed)
    samples = 0.5 + 0.15 * rng.standard_normal((size, size, 3))
    return RasterImage(np.clip(samples, 0.0, 1.0))


def single_coefficient_block(size: int = 32, freq: tuple[int, int] = (5, 5),
                             amplitude: float = 15.0) -> np.ndarray:
    """A block whose DCT has exactly one nonzero coefficient.

    With the default odd frequency pair the block is reproduced exactly by
    its kept top-left coefficients, yet restricting it to any of its four
    quadrants spreads energy outside the quadrant's kept band -- refinement
    strictly increases the approximation error.
    """
    coeffs = np.zeros((size, size))
    coeffs[freq] = amplitude
    return idct2(coeffs)


def spike_image(frame: int = 64, block: int = 32) -> RasterImage:
    """The single-coefficient block embedded top-left in a mid-gray frame."""
    block_values = single_coefficient_block(block)
    scale = 0.5 / np.abs(block_values).max()
    samples = np.full((frame, frame), 0.5)
    samples[:block, :block] = 0.5 + scale * block_values
    samples = np.clip(samples, 0.0, 1.0)
    return RasterImage(np.stack([samples] * 3, axis=2))


def build_corpus() -> dict[str, RasterImage]:
    """All corpus images keyed by name; fully deterministic."""
    return {
        "constant-64": constant_image(64),
        "gradient-512": gradient_image(512),
        "sines-512": sines_image(512),
        "cartoon-256": cartoon_image(256),
        "noise-128": noise_image(128),
        "spike-64": spike_image(64),
    }


def write_corpus(directory: str | Path) -> list[Path]:
    """Write every corpus image as a PPM file; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, img in sorted(build_corpus().items()):
        path = directory / f"{name}.ppm"
        write_ppm(img, path)
        paths.append(path)
    return paths
