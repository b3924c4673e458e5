"""Bit-level CAM semantics: packed words, Hamming distance, digital search.

Words are packed least-significant-bit first within each byte, so bit ``i``
of a word lives in byte ``i // 8`` at position ``i % 8``. The digital search
here is the ground truth that the analog matchline model and the DNA
classifier are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class WidthMismatchError(ValueError):
    pass


def _check_width(width: int) -> None:
    if not isinstance(width, (int, np.integer)) or width <= 0 or width % 8:
        raise ValueError(f"word width must be a positive multiple of 8, got {width!r}")


@dataclass(frozen=True)
class BitWord:
    """Fixed-width bit string, packed LSB-first."""

    width: int
    data: bytes

    def __post_init__(self):
        _check_width(self.width)
        if len(self.data) != self.width // 8:
            raise ValueError(
                f"expected {self.width // 8} bytes for width {self.width}, got {len(self.data)}"
            )

    @classmethod
    def zeros(cls, width: int) -> "BitWord":
        _check_width(width)
        return cls(width, bytes(width // 8))

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitWord":
        _check_width(width)
        if value < 0 or value >> width:
            raise ValueError(f"value does not fit in {width} bits")
        return cls(width, value.to_bytes(width // 8, "little"))

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "BitWord":
        """Build from a 0/1 sequence; ``bits[0]`` is the lowest-order bit."""
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        _check_width(arr.size)
        if np.any(arr > 1):
            raise ValueError("bits must be 0 or 1")
        return cls(arr.size, np.packbits(arr, bitorder="little").tobytes())

    @classmethod
    def from_positions(cls, positions: Iterable[int], width: int) -> "BitWord":
        value = 0
        for p in positions:
            if not 0 <= p < width:
                raise IndexError(f"bit position {p} outside width {width}")
            value |= 1 << p
        return cls.from_int(value, width)

    def to_int(self) -> int:
        return int.from_bytes(self.data, "little")

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.data, dtype=np.uint8), bitorder="little")

    def bit(self, i: int) -> int:
        if not 0 <= i < self.width:
            raise IndexError(i)
        return (self.data[i // 8] >> (i % 8)) & 1

    def flip(self, i: int) -> "BitWord":
        if not 0 <= i < self.width:
            raise IndexError(i)
        return BitWord.from_int(self.to_int() ^ (1 << i), self.width)

    def __xor__(self, other: "BitWord") -> "BitWord":
        _require_same_width(self.width, other.width)
        return BitWord.from_int(self.to_int() ^ other.to_int(), self.width)

    def __str__(self) -> str:
        # most significant bit first, like the literal patterns in datasheets
        return format(self.to_int(), f"0{self.width}b")


def _require_same_width(wa: int, wb: int) -> None:
    if wa != wb:
        raise WidthMismatchError(f"width mismatch: {wa} != {wb}")


def hamming_distance(a: BitWord, b: BitWord) -> int:
    _require_same_width(a.width, b.width)
    return (a.to_int() ^ b.to_int()).bit_count()


def oracle_match(a: BitWord, b: BitWord, threshold_bits: int) -> bool:
    """Ideal digital match: distance at or below the threshold."""
    if threshold_bits < 0:
        raise ValueError("threshold_bits must be non-negative")
    return hamming_distance(a, b) <= threshold_bits


class CamArray:
    """Dense n x m array of stored words.

    Rows are kept as an ``(n, m // 8)`` uint8 matrix so that a search is a
    single vectorized XOR + popcount over every row. Treat instances as
    immutable; :func:`store` returns a new array.
    """

    def __init__(self, width: int, packed: np.ndarray):
        _check_width(width)
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != width // 8:
            raise ValueError(f"packed rows must have shape (n, {width // 8})")
        packed.setflags(write=False)
        self.width = width
        self._packed = packed
        self._lane_cache = None

    @classmethod
    def from_words(cls, words: Sequence[BitWord], width: int | None = None) -> "CamArray":
        if width is None:
            if not words:
                raise ValueError("width is required for an empty array")
            width = words[0].width
        for w in words:
            _require_same_width(width, w.width)
        buf = b"".join(w.data for w in words)
        packed = np.frombuffer(buf, dtype=np.uint8).reshape(len(words), width // 8)
        return cls(width, packed.copy())

    @classmethod
    def zeros(cls, row_count: int, width: int) -> "CamArray":
        _check_width(width)
        return cls(width, np.zeros((row_count, width // 8), dtype=np.uint8))

    @property
    def row_count(self) -> int:
        return self._packed.shape[0]

    @property
    def packed(self) -> np.ndarray:
        """Read-only ``(row_count, width // 8)`` byte matrix."""
        return self._packed

    def __len__(self) -> int:
        return self.row_count

    def row(self, index: int) -> BitWord:
        if not 0 <= index < self.row_count:
            raise IndexError(f"row {index} out of range for {self.row_count} rows")
        return BitWord(self.width, self._packed[index].tobytes())

    @property
    def rows(self) -> list[BitWord]:
        return [self.row(i) for i in range(self.row_count)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CamArray):
            return NotImplemented
        return self.width == other.width and np.array_equal(self._packed, other._packed)

    def _lanes(self) -> np.ndarray:
        """Rows as ``(lanes, row_count)``, one contiguous vector per lane.

        uint64 lanes when the row length allows it, uint8 otherwise.
        """
        if self._lane_cache is None:
            p = self._packed
            words = p.view(np.uint64) if (self.width // 8) % 8 == 0 else p
            self._lane_cache = np.ascontiguousarray(words.T)
        return self._lane_cache

    def _query_lanes(self, query: BitWord) -> np.ndarray:
        q = np.frombuffer(query.data, dtype=np.uint8)
        if (self.width // 8) % 8 == 0:
            return q.view(np.uint64)
        return q

    def _batch_distances(self, qs: np.ndarray) -> np.ndarray:
        # qs: (batch, lanes) -> (batch, row_count) distances
        lanes = self._lanes()
        acc = np.zeros((qs.shape[0], self.row_count), dtype=np.uint16 if self.width < 2**16 else np.uint32)
        for i in range(lanes.shape[0]):
            acc += np.bitwise_count(lanes[i][None, :] ^ qs[:, i:i + 1])
        return acc

    def distances(self, query: BitWord) -> np.ndarray:
        """Hamming distance from ``query`` to every row, as an int array."""
        _require_same_width(self.width, query.width)
        qs = self._query_lanes(query)[None, :]
        return self._batch_distances(qs)[0].astype(np.int64)

    def min_distances(self, queries: Sequence[BitWord], batch: int = 32) -> np.ndarray:
        """Smallest row distance for each query."""
        if not len(queries):
            return np.zeros(0, dtype=np.int64)
        for q in queries:
            _require_same_width(self.width, q.width)
        if self.row_count == 0:
            return np.full(len(queries), self.width + 1, dtype=np.int64)
        out = np.empty(len(queries), dtype=np.int64)
        for start in range(0, len(queries), batch):
            chunk = queries[start:start + batch]
            qs = np.stack([self._query_lanes(q) for q in chunk])
            out[start:start + len(chunk)] = self._batch_distances(qs).min(axis=1)
        return out


def search_oracle(array: CamArray, query: BitWord, threshold_bits: int) -> set[int]:
    """Indices of every row within ``threshold_bits`` of the query."""
    if threshold_bits < 0:
        raise ValueError("threshold_bits must be non-negative")
    d = array.distances(query)
    return set(np.flatnonzero(d <= threshold_bits).tolist())


def store(array: CamArray, index: int, word: BitWord) -> CamArray:
    if not 0 <= index < array.row_count:
        raise IndexError(f"row {index} out of range for {array.row_count} rows")
    _require_same_width(array.width, word.width)
    packed = array.packed.copy()
    packed[index] = np.frombuffer(word.data, dtype=np.uint8)
    return CamArray(array.width, packed)
