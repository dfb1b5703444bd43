"""Binary serialization of a compressed image (the ".ajpg" format).

Layout (all multi-byte integers big-endian):

    magic "AJPG" | version u8 = 1 | padded h, w u32 | orig h, w u32
    | norm selector u8 | three channels (luma, then the two chroma planes):
        record count u32, then per record:
            level u8 | coefficient count uvarint | run-length coded values

Element positions are never stored: records are ordered by the
lexicographic order of their top-left pixels and the decoder re-derives
every position from that order.  A record's ``level`` gives its size as
``width = channel_width >> level`` (heights scale identically, so the
frame's aspect ratio is preserved).

Coefficients are stored in the diagonal scan order of the 8x8 block,
truncated at the last non-zero entry, then run-length coded as
``(zero run: uvarint, value: signed varint)`` pairs; a trailing zero run is
closed with a value-0 sentinel pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from struct import pack, unpack_from

import numpy as np

from .refiner import Element

MAGIC = b"AJPG"
VERSION = 1
NORM_CODES = {"l2": 0, "bv": 1}
NORM_NAMES = {code: name for name, code in NORM_CODES.items()}
COEFF_LIMIT = 1 << 15  # values must fit a signed 16-bit integer


class FormatError(ValueError):
    """A compressed image violates the format's invariants."""


class CorruptStreamError(ValueError):
    """A byte stream cannot be parsed back into a compressed image."""


# ---------------------------------------------------------------------------
# Diagonal coefficient enumeration of the 8x8 block.
#
# Diagonals are visited by increasing i+j; within a diagonal, entries run
# from the bottom-left to the top-right corner.  ZIGZAG_POSITIONS[n] is the
# 1-based (row, col) of scan index n+1.

ZIGZAG_POSITIONS: list[tuple[int, int]] = [
    (i, d - i)
    for d in range(2, 17)
    for i in range(min(d - 1, 8), max(1, d - 8) - 1, -1)
]
_ZIGZAG_INDEX = {pos: n + 1 for n, pos in enumerate(ZIGZAG_POSITIONS)}


def zigzag_index(i: int, j: int) -> int:
    """Scan index in 1..64 of the 1-based matrix position (i, j)."""
    if not (1 <= i <= 8 and 1 <= j <= 8):
        raise ValueError(f"position ({i}, {j}) outside the 8x8 block")
    return _ZIGZAG_INDEX[(i, j)]


def zigzag_position(n: int) -> tuple[int, int]:
    """Inverse of :func:`zigzag_index`."""
    if not 1 <= n <= 64:
        raise ValueError(f"scan index {n} outside 1..64")
    return ZIGZAG_POSITIONS[n - 1]


def truncate_coeffs(block: np.ndarray) -> list[int]:
    """Scan an 8x8 integer block diagonally and drop the trailing zero run."""
    block = np.asarray(block)
    if block.shape != (8, 8):
        raise ValueError(f"expected an 8x8 block, got {block.shape}")
    seq = [int(block[i - 1, j - 1]) for i, j in ZIGZAG_POSITIONS]
    while seq and seq[-1] == 0:
        seq.pop()
    return seq


def expand_coeffs(coeffs) -> np.ndarray:
    """Inverse of :func:`truncate_coeffs`."""
    coeffs = list(coeffs)
    if len(coeffs) > 64:
        raise ValueError(f"{len(coeffs)} coefficients exceed the 8x8 block")
    block = np.zeros((8, 8), dtype=np.int32)
    for n, value in enumerate(coeffs):
        i, j = ZIGZAG_POSITIONS[n]
        block[i - 1, j - 1] = value
    return block


# ---------------------------------------------------------------------------
# Records and element ordering


@dataclass(frozen=True)
class ElementRecord:
    """One stored element: its refinement level and truncated coefficients."""

    level: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))


@dataclass
class CompressedImage:
    """Parsed form of a serialized image: header fields plus channel records."""

    padded_height: int
    padded_width: int
    orig_height: int
    orig_width: int
    norm_kind: str
    channels: tuple[list[ElementRecord], list[ElementRecord], list[ElementRecord]] = field(
        default_factory=lambda: ([], [], [])
    )


def order_elements(elements) -> list[Element]:
    """Sort elements by the lexicographic order of their top-left pixels."""
    elements = list(elements)
    keys = [(e.top, e.left) for e in elements]
    if len(set(keys)) != len(keys):
        raise FormatError("two elements share a top-left pixel")
    return sorted(elements, key=lambda e: (e.top, e.left))


def max_level(height: int, width: int) -> int:
    """Deepest admissible level for a channel: leaves stay at least 8 wide."""
    return (min(height, width) // 8).bit_length() - 1


def records_from_leaves(leaves, channel_height: int, channel_width: int) -> list[ElementRecord]:
    """Build ordered records from ``(element, 8x8 integer block)`` pairs."""
    by_element = {leaf[0]: leaf[1] for leaf in leaves}
    records = []
    for element in order_elements(by_element.keys()):
        level = (channel_width // element.width).bit_length() - 1
        if channel_width >> level != element.width or channel_height >> level != element.height:
            raise FormatError(f"element {element} does not fit the level grid")
        records.append(ElementRecord(level, tuple(truncate_coeffs(by_element[element]))))
    return records


# ---------------------------------------------------------------------------
# Varints and run-length coding


def encode_uvarint(value: int) -> bytes:
    if value < 0:
        raise ValueError("uvarint cannot encode negatives")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def encode_svarint(value: int) -> bytes:
    # Interleave signs: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ...
    return encode_uvarint((value << 1) ^ (value >> 63) if value >= 0 else ((-value) << 1) - 1)


class _Reader:
    """Cursor over a byte stream with checked reads."""

    def __init__(self, data: bytes, context: str = "stream"):
        self.data = data
        self.pos = 0
        self.context = context

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptStreamError(f"truncated {self.context} at byte {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return unpack_from(">I", self.take(4))[0]

    def uvarint(self) -> int:
        shift = 0
        value = 0
        while True:
            byte = self.u8()
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return value
            shift += 7
            if shift > 63:
                raise CorruptStreamError(f"varint overflow in {self.context}")

    def svarint(self) -> int:
        raw = self.uvarint()
        return (raw >> 1) if not raw & 1 else -((raw + 1) >> 1)

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.data)


def rle_encode(values) -> bytes:
    """Run-length code an integer stream as (zero run, value) varint pairs.

    A run of zeros ending the stream is closed with a value-0 sentinel.
    """
    out = bytearray()
    run = 0
    for value in values:
        if value == 0:
            run += 1
        else:
            out += encode_uvarint(run)
            out += encode_svarint(int(value))
            run = 0
    if run:
        out += encode_uvarint(run)
        out += encode_svarint(0)
    return bytes(out)


def rle_decode(data: bytes) -> list[int]:
    """Exact inverse of :func:`rle_encode`."""
    reader = _Reader(data, "run-length stream")
    out: list[int] = []
    while not reader.exhausted:
        run = reader.uvarint()
        value = reader.svarint()
        out.extend([0] * run)
        if value == 0:
            if not reader.exhausted:
                raise CorruptStreamError("zero-value sentinel before end of stream")
            if run == 0:
                raise CorruptStreamError("empty sentinel pair")
            break
        out.append(value)
    return out


# ---------------------------------------------------------------------------
# Whole-image serialization


def _channel_dims(ci: CompressedImage, index: int) -> tuple[int, int]:
    if index == 0:
        return ci.padded_height, ci.padded_width
    return ci.padded_height // 2, ci.padded_width // 2


def _validate_record(record: ElementRecord, height: int, width: int, where: str) -> None:
    if not 0 <= record.level <= max_level(height, width):
        raise FormatError(f"{where}: level {record.level} invalid for {height}x{width}")
    if len(record.coeffs) > 64:
        raise FormatError(f"{where}: {len(record.coeffs)} coefficients exceed 64")
    if record.coeffs and record.coeffs[-1] == 0:
        raise FormatError(f"{where}: coefficient list ends in zero")
    for c in record.coeffs:
        if not -COEFF_LIMIT <= c < COEFF_LIMIT:
            raise FormatError(f"{where}: coefficient {c} outside signed 16-bit range")


def serialize(ci: CompressedImage) -> bytes:
    """Encode a compressed image to bytes; deterministic for equal inputs."""
    if ci.norm_kind not in NORM_CODES:
        raise FormatError(f"unknown norm kind {ci.norm_kind!r}")
    for name, value in (("padded height", ci.padded_height), ("padded width", ci.padded_width)):
        if value < 16 or value & (value - 1):
            raise FormatError(f"{name} {value} must be a power of two >= 16")
    if not (0 < ci.orig_height <= ci.padded_height and 0 < ci.orig_width <= ci.padded_width):
        raise FormatError("original dimensions exceed the padded frame")
    if len(ci.channels) != 3:
        raise FormatError("expected exactly three channels")

    out = bytearray()
    out += MAGIC
    out.append(VERSION)
    out += pack(">IIII", ci.padded_height, ci.padded_width, ci.orig_height, ci.orig_width)
    out.append(NORM_CODES[ci.norm_kind])
    for index, records in enumerate(ci.channels):
        height, width = _channel_dims(ci, index)
        out += pack(">I", len(records))
        for rec_index, record in enumerate(records):
            _validate_record(record, height, width, f"channel {index} record {rec_index}")
            out.append(record.level)
            out += encode_uvarint(len(record.coeffs))
            out += rle_encode(record.coeffs)
    return bytes(out)


def _read_record(reader: _Reader, height: int, width: int, where: str) -> ElementRecord:
    reader.context = where
    level = reader.u8()
    if not 0 <= level <= max_level(height, width):
        raise CorruptStreamError(f"{where}: level {level} invalid for {height}x{width}")
    count = reader.uvarint()
    if count > 64:
        raise CorruptStreamError(f"{where}: coefficient count {count} exceeds 64")
    coeffs: list[int] = []
    while len(coeffs) < count:
        run = reader.uvarint()
        value = reader.svarint()
        coeffs.extend([0] * run)
        if value == 0:
            raise CorruptStreamError(f"{where}: coefficient list ends in zero")
        coeffs.append(value)
        if not -COEFF_LIMIT <= value < COEFF_LIMIT:
            raise CorruptStreamError(f"{where}: coefficient {value} out of range")
    if len(coeffs) != count:
        raise CorruptStreamError(f"{where}: run-length data overruns its count")
    return ElementRecord(level, tuple(coeffs))


def deserialize(data: bytes) -> CompressedImage:
    """Exact inverse of :func:`serialize`, with full validation."""
    reader = _Reader(data, "header")
    if reader.take(4) != MAGIC:
        raise CorruptStreamError("bad magic; not an ajpg stream")
    version = reader.u8()
    if version != VERSION:
        raise CorruptStreamError(f"unsupported version {version}")
    padded_h, padded_w, orig_h, orig_w = unpack_from(">IIII", reader.take(16))
    for name, value in (("padded height", padded_h), ("padded width", padded_w)):
        if value < 16 or value & (value - 1):
            raise CorruptStreamError(f"{name} {value} must be a power of two >= 16")
    if not (0 < orig_h <= padded_h and 0 < orig_w <= padded_w):
        raise CorruptStreamError("original dimensions exceed the padded frame")
    norm_code = reader.u8()
    if norm_code not in NORM_NAMES:
        raise CorruptStreamError(f"unknown norm selector {norm_code}")

    ci = CompressedImage(padded_h, padded_w, orig_h, orig_w, NORM_NAMES[norm_code])
    for index in range(3):
        height, width = _channel_dims(ci, index)
        reader.context = f"channel {index} header"
        count = reader.u32()
        if count > height * width:
            raise CorruptStreamError(f"channel {index}: record count {count} impossible")
        records = ci.channels[index]
        for rec_index in range(count):
            records.append(
                _read_record(reader, height, width, f"channel {index} record {rec_index}")
            )
    if not reader.exhausted:
        raise CorruptStreamError(f"{len(data) - reader.pos} trailing bytes after image")
    return ci
