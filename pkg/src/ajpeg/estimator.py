"""Local and global error functionals that drive the mesh refinement.

Two norms are supported:

* ``l2`` -- the Euclidean norm weighted by ``1/sqrt(frame pixels)``, so a
  channel's global error is the RMS deviation per frame sample.  Global
  errors combine leaf errors in quadrature.
* ``bv`` -- an L1-plus-total-variation norm weighted by ``1/(frame pixels)``:
  the sum of absolute errors plus the absolute jumps of the error across
  pixel interfaces interior to the element.  Global errors add up linearly.

The *modified* error couples a leaf's error to its ancestors so that the
greedy marking step accounts for how much refinement already went into a
region; it is constant among the four children of one parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_KINDS = ("l2", "bv")


@dataclass(frozen=True)
class ElementError:
    """Error state of one leaf: its local error and its marking priority."""

    error: float
    modified_error: float


@dataclass(frozen=True)
class ErrorNorm:
    """Norm selector plus the frame dimensions that define the weight."""

    kind: str
    frame_height: int
    frame_width: int

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.frame_height < 1 or self.frame_width < 1:
            raise ValueError("frame dimensions must be positive")

    @property
    def frame_pixels(self) -> int:
        return self.frame_height * self.frame_width

    def local_error(self, pixels: np.ndarray, approx: np.ndarray) -> float:
        if self.kind == "l2":
            return local_error_l2(pixels, approx, self.frame_pixels)
        return local_error_bv(pixels, approx, self.frame_pixels)

    def global_error(self, errors) -> float:
        return global_error(errors, self.kind)


def local_error_l2(pixels: np.ndarray, approx: np.ndarray, frame_pixels: int) -> float:
    """Weighted L2 error of an element: ``sqrt(sum((approx - pixels)^2) / frame_pixels)``."""
    diff = np.asarray(approx, dtype=np.float64) - np.asarray(pixels, dtype=np.float64)
    return math.sqrt(float(np.sum(diff * diff)) / frame_pixels)


def local_error_bv(pixels: np.ndarray, approx: np.ndarray, frame_pixels: int) -> float:
    """Weighted BV error of an element.

    Counts the L1 mass of the error plus the absolute jumps across the
    interfaces whose both pixels lie inside the element; jumps across the
    element boundary are not attributed to any element.
    """
    diff = np.asarray(approx, dtype=np.float64) - np.asarray(pixels, dtype=np.float64)
    total = float(np.sum(np.abs(diff)))
    if diff.shape[1] > 1:
        total += float(np.sum(np.abs(diff[:, 1:] - diff[:, :-1])))
    if diff.shape[0] > 1:
        total += float(np.sum(np.abs(diff[1:, :] - diff[:-1, :])))
    return total / frame_pixels


def global_error(errors, kind: str) -> float:
    """Combine leaf errors: in quadrature for ``l2``, linearly for ``bv``."""
    arr = np.asarray(list(errors), dtype=np.float64)
    if kind == "l2":
        return math.sqrt(float(np.sum(arr * arr)))
    if kind == "bv":
        return float(np.sum(arr))
    raise ValueError(f"unknown norm kind {kind!r}")


def modified_error_children(parent_error: float, parent_modified: float,
                            child_errors) -> float:
    """Modified error shared by the four children of a refined element.

    ``m_child^2 = (sum of child errors^2) / (e^2 + m^2) * m^2`` with ``e``
    and ``m`` the parent's error and modified error.  A parent with
    ``e = m = 0`` is represented exactly, so its children get priority 0.
    """
    child_errors = list(child_errors)
    if parent_error < 0 or parent_modified < 0 or any(c < 0 for c in child_errors):
        raise ValueError("errors must be nonnegative")
    num = sum(c * c for c in child_errors)
    den = parent_error * parent_error + parent_modified * parent_modified
    if den == 0.0 or num == 0.0:
        return 0.0
    return math.sqrt(num / den) * parent_modified
