"""Greedy quadtree refinement of one channel.

Starting from a single root element covering the whole (power-of-two)
channel, the loop repeatedly computes per-leaf errors against the
keep-top-left-coefficients approximation, marks every leaf whose modified
error attains the maximum, and splits the marked leaves into four congruent
children.  It stops once the global error drops to the tolerance, or when
the maximum is only attained by leaves already at the minimum refinable
size (both dimensions of a markable leaf must be at least 16, so no leaf
ever falls below 8 pixels in either direction).

Only after the mesh is final are the per-leaf coefficient blocks quantized.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import ErrorNorm, modified_error_children
from .transform import (
    KEPT_BLOCK,
    QUANT_MATRIX,
    approx_block_unquantized,
    dct2,
    quantized_block,
    reconstruct_block,
)

MIN_MARKABLE = 16


@dataclass(frozen=True, order=True)
class Element:
    """A rectangular pixel block; ``top``/``left`` are 1-based positions."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.top < 1 or self.left < 1 or self.height < 1 or self.width < 1:
            raise ValueError(f"invalid element {self}")

    @property
    def min_side(self) -> int:
        return min(self.height, self.width)


def refine_element(element: Element) -> list[Element]:
    """Split an element into four congruent children (two bisections)."""
    if element.height % 2 or element.width % 2:
        raise ValueError(f"cannot bisect odd-sized element {element}")
    h2, w2 = element.height // 2, element.width // 2
    t, l = element.top, element.left
    return [
        Element(t, l, h2, w2),
        Element(t, l + w2, h2, w2),
        Element(t + h2, l, h2, w2),
        Element(t + h2, l + w2, h2, w2),
    ]


class MeshNode:
    """A node of the refinement tree; leaves carry no children."""

    __slots__ = ("element", "children")

    def __init__(self, element: Element):
        self.element = element
        self.children: list[MeshNode] | None = None

    def split(self) -> list["MeshNode"]:
        self.children = [MeshNode(e) for e in refine_element(self.element)]
        return self.children


class MeshTree:
    """Quadtree over a channel; the leaves partition the frame."""

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self.root = MeshNode(Element(1, 1, height, width))

    def leaves(self) -> list[MeshNode]:
        out: list[MeshNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.children is None:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def leaf_elements(self) -> list[Element]:
        return [n.element for n in self.leaves()]


@dataclass
class _Leaf:
    node: MeshNode
    error: float
    modified_error: float


class RefinerState:
    """Leaf set plus a max-priority structure keyed on the modified error.

    ``priority="heap"`` keeps a lazy binary max-heap; ``priority="scan"`` is
    the naive re-scan variant kept around as a cross-checking oracle.  Both
    produce identical mesh sequences because marking compares the stored
    modified errors bit-exactly either way.
    """

    def __init__(self, priority: str = "heap"):
        if priority not in ("heap", "scan"):
            raise ValueError(f"unknown priority structure {priority!r}")
        self.priority = priority
        self.leaves: dict[int, _Leaf] = {}
        self._heap: list[tuple[float, int]] = []
        self._next_id = 0

    def add_leaf(self, node: MeshNode, error: float, modified_error: float) -> int:
        leaf_id = self._next_id
        self._next_id += 1
        self.leaves[leaf_id] = _Leaf(node, error, modified_error)
        if self.priority == "heap":
            heapq.heappush(self._heap, (-modified_error, leaf_id))
        return leaf_id

    def remove_leaf(self, leaf_id: int) -> _Leaf:
        # Heap entries are discarded lazily when they surface in max queries.
        return self.leaves.pop(leaf_id)

    def max_modified_error(self) -> float:
        if not self.leaves:
            raise ValueError("empty leaf set")
        if self.priority == "heap":
            while self._heap and self._heap[0][1] not in self.leaves:
                heapq.heappop(self._heap)
            return -self._heap[0][0]
        return max(leaf.modified_error for leaf in self.leaves.values())

    def mark(self) -> list[int]:
        """All leaves attaining the maximum modified error that may be split."""
        top = self.max_modified_error()
        return [
            leaf_id
            for leaf_id, leaf in self.leaves.items()
            if leaf.modified_error == top and leaf.node.element.min_side >= MIN_MARKABLE
        ]

    def global_error(self, norm: ErrorNorm) -> float:
        return norm.global_error(leaf.error for leaf in self.leaves.values())


def priority_update(state: RefinerState, refined_ids, children) -> RefinerState:
    """Replace refined leaves by their children in the priority structure.

    ``children`` is a list of ``(node, error, modified_error)`` triples.
    """
    if not state.leaves:
        raise ValueError("empty leaf set")
    for leaf_id in refined_ids:
        state.remove_leaf(leaf_id)
    for node, error, modified in children:
        state.add_leaf(node, error, modified)
    return state


@dataclass
class LeafResult:
    element: Element
    error: float
    modified_error: float
    coeffs: np.ndarray  # quantized 8x8 integer block


@dataclass
class RefineResult:
    tree: MeshTree
    leaves: list[LeafResult]
    error_unquantized: float
    error_quantized: float
    iterations: int
    terminated_by: str  # "tolerance" or "floor"
    mesh_history: list[list[Element]] = field(default_factory=list)


def _leaf_error(values: np.ndarray, element: Element, norm: ErrorNorm) -> float:
    pixels = values[
        element.top - 1 : element.top - 1 + element.height,
        element.left - 1 : element.left - 1 + element.width,
    ]
    if element.height == KEPT_BLOCK and element.width == KEPT_BLOCK:
        return 0.0  # the kept block covers every coefficient
    if norm.kind == "l2":
        # Parseval: the residual energy equals the energy of the dropped
        # coefficients, so no inverse transform is needed.
        coeffs = dct2(pixels)
        kept = coeffs[:KEPT_BLOCK, :KEPT_BLOCK]
        energy = float(np.sum(pixels * pixels)) - float(np.sum(kept * kept))
        return math.sqrt(max(energy, 0.0) / norm.frame_pixels)
    return norm.local_error(pixels, approx_block_unquantized(pixels))


def run_adaptive(
    values: np.ndarray,
    tolerance: float,
    norm: ErrorNorm | str = "l2",
    quant: np.ndarray = QUANT_MATRIX,
    priority: str = "heap",
    record_meshes: bool = False,
) -> RefineResult:
    """Adapt a mesh on one channel until its error is at most ``tolerance``.

    ``values`` must be a 2D array with power-of-two dimensions, each at
    least 8.  Returns the final mesh together with the quantized
    coefficient block of every leaf and both the unquantized mesh error
    (the quantity compared against the tolerance) and the error of the
    fully quantized reconstruction.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    if h < KEPT_BLOCK or w < KEPT_BLOCK:
        raise ValueError(f"channel {h}x{w} smaller than 8x8")
    if h & (h - 1) or w & (w - 1):
        raise ValueError(f"channel dimensions {h}x{w} must be powers of two")
    if isinstance(norm, str):
        norm = ErrorNorm(norm, h, w)
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")

    tree = MeshTree(h, w)
    state = RefinerState(priority)
    root_error = _leaf_error(values, tree.root.element, norm)
    state.add_leaf(tree.root, root_error, root_error)

    history: list[list[Element]] = []
    if record_meshes:
        history.append([leaf.node.element for leaf in state.leaves.values()])

    iterations = 0
    terminated_by = "tolerance"
    while True:
        if state.global_error(norm) <= tolerance:
            break
        marked = state.mark()
        if not marked:
            terminated_by = "floor"
            break
        children: list[tuple[MeshNode, float, float]] = []
        for leaf_id in marked:
            leaf = state.leaves[leaf_id]
            child_nodes = leaf.node.split()
            child_errors = [_leaf_error(values, n.element, norm) for n in child_nodes]
            shared = modified_error_children(leaf.error, leaf.modified_error, child_errors)
            children.extend(
                (node, err, shared) for node, err in zip(child_nodes, child_errors)
            )
        priority_update(state, marked, children)
        iterations += 1
        if record_meshes:
            history.append([leaf.node.element for leaf in state.leaves.values()])

    # Quantize each leaf once the mesh is final and measure the quantized error.
    leaves: list[LeafResult] = []
    quantized_errors: list[float] = []
    for leaf in state.leaves.values():
        e = leaf.node.element
        pixels = values[e.top - 1 : e.top - 1 + e.height, e.left - 1 : e.left - 1 + e.width]
        qblock = quantized_block(pixels, quant)
        approx = reconstruct_block(qblock, e.height, e.width, quant)
        quantized_errors.append(norm.local_error(pixels, approx))
        leaves.append(LeafResult(e, leaf.error, leaf.modified_error, qblock))

    return RefineResult(
        tree=tree,
        leaves=leaves,
        error_unquantized=state.global_error(norm),
        error_quantized=norm.global_error(quantized_errors),
        iterations=iterations,
        terminated_by=terminated_by,
        mesh_history=history,
    )


def finest_mesh(values: np.ndarray, norm: ErrorNorm | str = "l2",
                quant: np.ndarray = QUANT_MATRIX) -> RefineResult:
    """Build the fully refined mesh directly (every leaf at the 8-pixel floor).

    This is the fixed-grid baseline the adaptive mesh is benchmarked
    against; it uses the same quantization and storage path.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    if h < KEPT_BLOCK or w < KEPT_BLOCK:
        raise ValueError(f"channel {h}x{w} smaller than 8x8")
    if h & (h - 1) or w & (w - 1):
        raise ValueError(f"channel dimensions {h}x{w} must be powers of two")
    if isinstance(norm, str):
        norm = ErrorNorm(norm, h, w)

    tree = MeshTree(h, w)
    frontier = [tree.root]
    while frontier:
        nxt = []
        for node in frontier:
            if node.element.min_side >= MIN_MARKABLE:
                nxt.extend(node.split())
        frontier = nxt

    leaves: list[LeafResult] = []
    unquantized: list[float] = []
    quantized: list[float] = []
    for node in tree.leaves():
        e = node.element
        pixels = values[e.top - 1 : e.top - 1 + e.height, e.left - 1 : e.left - 1 + e.width]
        err = _leaf_error(values, e, norm)
        qblock = quantized_block(pixels, quant)
        approx = reconstruct_block(qblock, e.height, e.width, quant)
        unquantized.append(err)
        quantized.append(norm.local_error(pixels, approx))
        leaves.append(LeafResult(e, err, err, qblock))

    return RefineResult(
        tree=tree,
        leaves=leaves,
        error_unquantized=norm.global_error(unquantized),
        error_quantized=norm.global_error(quantized),
        iterations=0,
        terminated_by="uniform",
    )
