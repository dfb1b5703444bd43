"""Reconstruction of a compressed image from its ordered element records.

Positions are never stored: records arrive sorted by the lexicographic
order of their top-left pixels, and each one is placed at the minimal (in
that order) pixel not yet covered.  The minimum is always found adjacent to
the corners of previously placed elements -- the pixel right of a placed
element's top-right corner or below its bottom-left corner -- so a small
candidate list replaces a full-grid scan.  A bit-grid scanner backs the
oracle tests for this optimization.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right

import numpy as np

from .bitstream import (
    CompressedImage,
    CorruptStreamError,
    ElementRecord,
    deserialize,
    expand_coeffs,
)
from .image import ChannelPlane, RasterImage, upsample_chroma, ycbcr_to_rgb
from .refiner import Element
from .transform import QUANT_MATRIX, reconstruct_block


class PlacementState:
    """Occupancy of a channel plus the candidate pixels for the next element.

    Occupancy is tracked as disjoint, sorted column intervals per row;
    candidates are a min-heap of 1-based (row, col) pairs.  Candidates may
    go stale (covered by a later element) and are skipped lazily.
    """

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self._rows: list[list[tuple[int, int]]] = [[] for _ in range(height)]
        self._candidates: list[tuple[int, int]] = [(1, 1)]
        self.occupied = 0

    def is_empty(self, row: int, col: int) -> bool:
        """Whether the 1-based pixel (row, col) is not yet covered."""
        intervals = self._rows[row - 1]
        k = bisect_right(intervals, (col, self.width + 2)) - 1
        return not (k >= 0 and intervals[k][0] <= col < intervals[k][1])

    @property
    def full(self) -> bool:
        return self.occupied == self.height * self.width

    def min_empty(self) -> tuple[int, int] | None:
        """The lexicographically minimal empty pixel, via the candidate list."""
        while self._candidates:
            row, col = self._candidates[0]
            if self.is_empty(row, col):
                return row, col
            heapq.heappop(self._candidates)
        return None

    def place(self, element: Element) -> None:
        """Mark an element's pixels occupied; reject overlap or out-of-bounds."""
        top, left, h, w = element.top, element.left, element.height, element.width
        if top + h - 1 > self.height or left + w - 1 > self.width:
            raise CorruptStreamError(f"element {element} exceeds the {self.height}x{self.width} frame")
        lo, hi = left, left + w  # half-open column interval
        for row in range(top - 1, top - 1 + h):
            intervals = self._rows[row]
            k = bisect_right(intervals, (lo, self.width + 2))
            if k > 0 and intervals[k - 1][1] > lo:
                raise CorruptStreamError(f"element {element} overlaps occupied pixels")
            if k < len(intervals) and intervals[k][0] < hi:
                raise CorruptStreamError(f"element {element} overlaps occupied pixels")
            # Merge with the neighbors when the intervals touch.
            start, end = lo, hi
            if k > 0 and intervals[k - 1][1] == lo:
                start = intervals[k - 1][0]
                k -= 1
                intervals.pop(k)
            if k < len(intervals) and intervals[k][0] == hi:
                end = intervals[k][1]
                intervals.pop(k)
            intervals.insert(k, (start, end))
        self.occupied += h * w
        self.candidate_update(element)

    def candidate_update(self, element: Element) -> None:
        """Insert the in-bounds corner neighbors of a placed element."""
        right = (element.top, element.left + element.width)
        below = (element.top + element.height, element.left)
        if right[1] <= self.width:
            heapq.heappush(self._candidates, right)
        if below[0] <= self.height:
            heapq.heappush(self._candidates, below)


class BitGridPlacement:
    """Naive full-grid reference used as the oracle for PlacementState."""

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self.grid = np.zeros((height, width), dtype=bool)

    @property
    def full(self) -> bool:
        return bool(self.grid.all())

    def min_empty(self) -> tuple[int, int] | None:
        flat = np.argmin(self.grid)
        if self.grid.flat[flat]:
            return None
        return flat // self.width + 1, flat % self.width + 1

    def place(self, element: Element) -> None:
        t, l = element.top - 1, element.left - 1
        if t + element.height > self.height or l + element.width > self.width:
            raise CorruptStreamError(f"element {element} exceeds the frame")
        region = self.grid[t : t + element.height, l : l + element.width]
        if region.any():
            raise CorruptStreamError(f"element {element} overlaps occupied pixels")
        region[:] = True


def reconstruct_channel(
    records: list[ElementRecord],
    height: int,
    width: int,
    quant: np.ndarray = QUANT_MATRIX,
) -> tuple[np.ndarray, list[Element]]:
    """Rebuild one channel from its ordered records.

    Returns the reconstructed samples plus the placed elements in placement
    order.  Raises :class:`CorruptStreamError` when records overlap, run out
    while pixels remain empty, or remain after the frame is full.
    """
    values = np.zeros((height, width), dtype=np.float64)
    state = PlacementState(height, width)
    placed: list[Element] = []
    for index, record in enumerate(records):
        spot = state.min_empty()
        if spot is None:
            raise CorruptStreamError(f"record {index}: no empty pixel left for it")
        w = width >> record.level
        h = height >> record.level
        element = Element(spot[0], spot[1], h, w)
        state.place(element)
        block = reconstruct_block(expand_coeffs(record.coeffs), h, w, quant)
        values[spot[0] - 1 : spot[0] - 1 + h, spot[1] - 1 : spot[1] - 1 + w] = block
        placed.append(element)
    if not state.full:
        raise CorruptStreamError(
            f"records exhausted with {height * width - state.occupied} empty pixels remaining"
        )
    return values, placed


def decode_planes(
    data: bytes, quant: np.ndarray = QUANT_MATRIX
) -> tuple[CompressedImage, list[tuple[np.ndarray, list[Element]]]]:
    """Deserialize and reconstruct all three channels, keeping placements."""
    ci = deserialize(data)
    h, w = ci.padded_height, ci.padded_width
    planes = [
        reconstruct_channel(ci.channels[0], h, w, quant),
        reconstruct_channel(ci.channels[1], h // 2, w // 2, quant),
        reconstruct_channel(ci.channels[2], h // 2, w // 2, quant),
    ]
    return ci, planes


def decode(data: bytes, quant: np.ndarray = QUANT_MATRIX) -> RasterImage:
    """Decode an ".ajpg" byte stream back into an RGB image."""
    ci, planes = decode_planes(data, quant)
    cb = upsample_chroma(ChannelPlane(planes[1][0]), ci.padded_height, ci.padded_width)
    cr = upsample_chroma(ChannelPlane(planes[2][0]), ci.padded_height, ci.padded_width)
    rgb = ycbcr_to_rgb(ChannelPlane(np.clip(planes[0][0], 0.0, 1.0)),
                       ChannelPlane(np.clip(cb.values, 0.0, 1.0)),
                       ChannelPlane(np.clip(cr.values, 0.0, 1.0)))
    return RasterImage(rgb.samples[: ci.orig_height, : ci.orig_width, :].copy())
