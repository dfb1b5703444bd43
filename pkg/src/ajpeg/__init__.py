"""Adaptive quadtree image codec with an accompanying analysis suite.

The encoder adapts a quadtree mesh over each color channel, stores the
quantized top-left DCT coefficients of every leaf, and serializes them in
an order that lets the decoder recover all element positions without
storing them.  :mod:`ajpeg.analysis` quantifies when greedy refinement of
this kind is near-optimal.
"""

from .codec import EncodeConfig, EncodeResult, encode
from .decoder import decode
from .image import RasterImage, read_image, write_image
from .metrics import Metrics, compare

__all__ = [
    "EncodeConfig",
    "EncodeResult",
    "Metrics",
    "RasterImage",
    "compare",
    "decode",
    "encode",
    "read_image",
    "write_image",
]

__version__ = "0.1.0"
