"""Core domain types: packed binary codes, embeddings, corpus records, results.

Bit convention: bit b of 64-bit word w encodes dimension 64*w + b (LSB-first
within each word), bit 1 means code value +1 and bit 0 means -1. Padding bits
above `dims` are always zero, so equality is plain bitwise equality.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

WORD_BITS = 64


def words_per_code(dims: int) -> int:
    return (dims + WORD_BITS - 1) // WORD_BITS


def _as_u64_rows(byte_rows: np.ndarray, dims: int) -> np.ndarray:
    """View packed little-order bytes as little-endian uint64 words, padding as needed."""
    n, nbytes = byte_rows.shape
    w = words_per_code(dims)
    if nbytes != w * 8:
        padded = np.zeros((n, w * 8), dtype=np.uint8)
        padded[:, :nbytes] = byte_rows
        byte_rows = padded
    words = byte_rows.view("<u8")
    if sys.byteorder != "little":
        words = words.byteswap().view(np.uint64)
    return np.ascontiguousarray(words)


def _u8_view(words: np.ndarray) -> np.ndarray:
    """Little-endian byte view of uint64 words (copy only on big-endian hosts)."""
    if sys.byteorder != "little":
        words = words.astype("<u8")
    return words.view(np.uint8)


def pack_bit_rows(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, dims) 0/1 array into (n, ceil(dims/64)) uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    packed = np.packbits(bits, axis=1, bitorder="little")
    return _as_u64_rows(packed, bits.shape[1])


def unpack_bit_rows(words: np.ndarray, dims: int) -> np.ndarray:
    """Unpack (n, W) uint64 words back into an (n, dims) 0/1 uint8 array."""
    return np.unpackbits(_u8_view(words), axis=1, bitorder="little", count=dims)


def padding_mask(dims: int) -> np.ndarray:
    """Per-word AND mask that clears every bit above `dims`."""
    w = words_per_code(dims)
    mask = np.full(w, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    tail = dims % WORD_BITS
    if tail:
        mask[-1] = np.uint64((1 << tail) - 1)
    return mask


@dataclass(frozen=True, eq=False)
class BinaryCode:
    """A d-bit code in {-1,+1}^d stored as packed 64-bit words."""

    dims: int
    words: np.ndarray

    def __post_init__(self):
        if self.dims < 1:
            raise ValidationError("BinaryCode dims must be >= 1")
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.shape != (words_per_code(self.dims),):
            raise ValidationError(
                f"expected {words_per_code(self.dims)} words for {self.dims} dims, "
                f"got shape {words.shape}"
            )
        if np.any(words & ~padding_mask(self.dims)):
            raise ValidationError("padding bits above dims must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.dims, self.words.tobytes()))

    def to_signs(self) -> np.ndarray:
        """Unpack into an int8 array of +1/-1 values."""
        bits = unpack_bit_rows(self.words[None, :], self.dims)[0]
        return (bits.astype(np.int8) * 2) - 1


def new_binary_code(bits: Sequence[int]) -> BinaryCode:
    """Pack a sequence of +1/-1 values into a canonical BinaryCode."""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError("bit sequence must be one-dimensional and non-empty")
    if not np.all(np.isin(arr, (-1, 1))):
        raise ValidationError("every element must be +1 or -1")
    words = pack_bit_rows((arr == 1).astype(np.uint8)[None, :])[0]
    return BinaryCode(dims=int(arr.size), words=words)


def unpack_code(code: BinaryCode) -> np.ndarray:
    """Inverse of new_binary_code: the +1/-1 sign sequence as int8."""
    return code.to_signs()


@dataclass(frozen=True, eq=False)
class DenseVector:
    """A d-dimensional float64 embedding; every value must be finite."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("DenseVector must be one-dimensional and non-empty")
        if not np.all(np.isfinite(values)):
            raise ValidationError("DenseVector values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dims(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


def as_float_vector(x) -> np.ndarray:
    """Coerce a DenseVector or array-like into a finite float64 1-D array."""
    values = x.values if isinstance(x, DenseVector) else np.asarray(x, dtype=np.float64)
    if values.ndim != 1:
        raise ValidationError("expected a one-dimensional vector")
    if not np.all(np.isfinite(values)):
        raise ValidationError("vector contains NaN or Inf")
    return values


@dataclass(frozen=True)
class PassageRecord:
    """A corpus entry: dense non-negative id plus an opaque payload."""

    id: int
    payload: bytes = b""

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError("passage id must be non-negative")


@dataclass(frozen=True)
class SearchResult:
    """One ranked hit. hamming is the candidate-stage distance (absent for
    pure float search); score is the rerank inner product (absent when
    reranking is disabled)."""

    id: int
    hamming: Optional[int] = None
    score: Optional[float] = None


@dataclass(frozen=True)
class TrainingInstance:
    """A question with one positive and >= 1 hard-negative feature rows."""

    question: np.ndarray
    positive: np.ndarray
    negatives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        q = as_float_vector(self.question)
        p = as_float_vector(self.positive)
        negs = tuple(as_float_vector(n) for n in self.negatives)
        dims = {q.size, p.size} | {n.size for n in negs}
        if len(dims) != 1:
            raise ValidationError("question, positive and negatives must share one dimensionality")
        object.__setattr__(self, "question", q)
        object.__setattr__(self, "positive", p)
        object.__setattr__(self, "negatives", negs)

    @property
    def input_dims(self) -> int:
        return int(self.question.size)
