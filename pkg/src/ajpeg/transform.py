"""Block transforms: orthonormal 2D DCT, top-left restriction, quantization.

All block operations are pure functions on 2D float arrays.  Frequency
indices are zero-based with the DC coefficient at ``[0, 0]``.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

# Standard JPEG luminance quantization table.  A single table is used for
# all channels; per-channel quality scaling is out of scope.
QUANT_MATRIX = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

KEPT_BLOCK = 8

# The quantization table is calibrated for 8-bit, level-shifted samples.
# Planes are kept in [0, 1] internally and mapped onto that scale only for
# the quantization path.
SAMPLE_SCALE = 255.0
SAMPLE_OFFSET = 128.0


def to_quant_scale(block: np.ndarray) -> np.ndarray:
    """Map samples from [0, 1] to the level-shifted 8-bit scale."""
    return block * SAMPLE_SCALE - SAMPLE_OFFSET


def from_quant_scale(block: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_quant_scale`."""
    return (block + SAMPLE_OFFSET) / SAMPLE_SCALE


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II of a real block of any shape (h, w >= 1).

    Normalized so that the transform is an isometry: ``||dct2(x)|| == ||x||``.
    """
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] < 1 or block.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2D block, got shape {block.shape}")
    return dctn(block, norm="ortho")


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2`."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2D block, got shape {coeffs.shape}")
    return idctn(coeffs, norm="ortho")


def tl_restrict(coeffs: np.ndarray) -> np.ndarray:
    """Keep the top-left 8x8 block of a coefficient matrix."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] < KEPT_BLOCK or coeffs.shape[1] < KEPT_BLOCK:
        raise ValueError(f"coefficient matrix {coeffs.shape} smaller than 8x8")
    return coeffs[:KEPT_BLOCK, :KEPT_BLOCK].copy()


def tl_embed(block8: np.ndarray, height: int, width: int) -> np.ndarray:
    """Embed an 8x8 matrix as the top-left block of an otherwise zero h x w matrix."""
    block8 = np.asarray(block8, dtype=np.float64)
    if block8.shape != (KEPT_BLOCK, KEPT_BLOCK):
        raise ValueError(f"expected an 8x8 block, got {block8.shape}")
    if height < KEPT_BLOCK or width < KEPT_BLOCK:
        raise ValueError(f"target {height}x{width} smaller than 8x8")
    out = np.zeros((height, width), dtype=np.float64)
    out[:KEPT_BLOCK, :KEPT_BLOCK] = block8
    return out


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (JPEG convention)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(block8: np.ndarray, quant: np.ndarray = QUANT_MATRIX) -> np.ndarray:
    """Entrywise divide an 8x8 coefficient block by the table and round."""
    block8 = np.asarray(block8, dtype=np.float64)
    if block8.shape != (KEPT_BLOCK, KEPT_BLOCK):
        raise ValueError(f"expected an 8x8 block, got {block8.shape}")
    return round_half_away(block8 / quant).astype(np.int32)


def dequantize(qblock: np.ndarray, quant: np.ndarray = QUANT_MATRIX) -> np.ndarray:
    """Entrywise multiply quantized integers back by the table."""
    qblock = np.asarray(qblock)
    if qblock.shape != (KEPT_BLOCK, KEPT_BLOCK):
        raise ValueError(f"expected an 8x8 block, got {qblock.shape}")
    return qblock.astype(np.float64) * quant


def approx_block_unquantized(pixels: np.ndarray) -> np.ndarray:
    """Approximate a block by keeping only its top-left 8x8 DCT coefficients.

    This is the approximation used while the mesh is being adapted: no
    quantization, exact for any block that is 8x8 or spectrally inside the
    kept band.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape == (KEPT_BLOCK, KEPT_BLOCK):
        return pixels.copy()
    coeffs = dct2(pixels)
    kept = np.zeros_like(coeffs)
    kept[:KEPT_BLOCK, :KEPT_BLOCK] = coeffs[:KEPT_BLOCK, :KEPT_BLOCK]
    return idct2(kept)


def approx_block_final(pixels: np.ndarray, quant: np.ndarray = QUANT_MATRIX) -> np.ndarray:
    """Approximate a block through the full quantize/dequantize path.

    ``idct2(tl_embed(dequantize(quantize(tl_restrict(dct2(x))))))`` -- the
    reconstruction a decoder produces from the stored integer block.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    coeffs = dct2(pixels)
    f = quantize(tl_restrict(coeffs), quant)
    return idct2(tl_embed(dequantize(f, quant), pixels.shape[0], pixels.shape[1]))


def quantized_block(pixels: np.ndarray, quant: np.ndarray = QUANT_MATRIX) -> np.ndarray:
    """The stored 8x8 integer block for an element's [0, 1] samples."""
    return quantize(tl_restrict(dct2(to_quant_scale(pixels))), quant)


def reconstruct_block(qblock: np.ndarray, height: int, width: int,
                      quant: np.ndarray = QUANT_MATRIX) -> np.ndarray:
    """Invert :func:`quantized_block` up to rounding, back on the [0, 1] scale."""
    coeffs = tl_embed(dequantize(qblock, quant), height, width)
    return from_quant_scale(idct2(coeffs))
