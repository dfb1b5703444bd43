"""Shared test utilities: oracles and random mesh generation."""

from __future__ import annotations

import math

import numpy as np

from ajpeg.refiner import Element, refine_element


def direct_dct2(block: np.ndarray) -> np.ndarray:
    """Brute-force O(n^4) evaluation of the orthonormal 2D DCT-II."""
    block = np.asarray(block, dtype=np.float64)
    h, w = block.shape
    out = np.zeros((h, w))
    for u in range(h):
        cu = 1.0 / math.sqrt(2.0) if u == 0 else 1.0
        for v in range(w):
            cv = 1.0 / math.sqrt(2.0) if v == 0 else 1.0
            acc = 0.0
            for k in range(h):
                for l in range(w):
                    acc += (
                        block[k, l]
                        * math.cos((2 * k + 1) * u * math.pi / (2 * h))
                        * math.cos((2 * l + 1) * v * math.pi / (2 * w))
                    )
            out[u, v] = 2.0 / math.sqrt(h * w) * cu * cv * acc
    return out


def random_mesh(height: int, width: int, rng: np.random.Generator,
                split_prob: float = 0.6) -> list[Element]:
    """A random admissible quadtree mesh (leaves never below 8 pixels)."""
    leaves: list[Element] = []
    stack = [Element(1, 1, height, width)]
    while stack:
        e = stack.pop()
        if min(e.height, e.width) >= 16 and rng.random() < split_prob:
            stack.extend(refine_element(e))
        else:
            leaves.append(e)
    return leaves


def random_coeff_block(rng: np.random.Generator, density: float = 0.3) -> np.ndarray:
    """A plausible quantized 8x8 integer block (sparse, small values)."""
    block = np.zeros((8, 8), dtype=np.int32)
    mask = rng.random((8, 8)) < density
    block[mask] = rng.integers(-300, 301, size=int(mask.sum()))
    return block
