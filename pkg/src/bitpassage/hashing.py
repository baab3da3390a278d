"""Hash codec: sign function, scaled-tanh relaxation, annealing schedule,
Hamming distance and the asymmetric float-by-binary inner product.

All operations are pure functions over immutable inputs and safe to call
from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .types import (
    BinaryCode,
    DenseVector,
    as_float_vector,
    pack_bit_rows,
    unpack_bit_rows,
)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M3 = np.uint64(0x0F0F0F0F0F0F0F0F)
_M4 = np.uint64(0x0101010101010101)


def _popcount_swar(words: np.ndarray) -> np.ndarray:
    """Portable per-word popcount (SWAR); bit-identical to the hardware path."""
    x = words - ((words >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M3
    return ((x * _M4) >> np.uint64(56)).astype(np.uint8)


_HAVE_HW_POPCOUNT = hasattr(np, "bitwise_count")


def popcount_words(words: np.ndarray) -> np.ndarray:
    """Per-word set-bit count as uint8, hardware-accelerated when available."""
    if _HAVE_HW_POPCOUNT:
        return np.bitwise_count(words)
    return _popcount_swar(words)


@dataclass
class BetaSchedule:
    """Annealing for the tanh sharpness: beta = sqrt(gamma * step + 1)."""

    gamma: float
    step: int = 0

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.step < 0:
            raise ValidationError("step must be non-negative")

    def current(self) -> float:
        return beta_at(self, self.step)

    def advance(self) -> float:
        """Bump the finished-step counter and return the new current beta."""
        self.step += 1
        return self.current()


def beta_at(schedule: BetaSchedule, step: int) -> float:
    if step < 0:
        raise ValidationError("step must be non-negative")
    return math.sqrt(schedule.gamma * step + 1.0)


def sign_hash_matrix(values: np.ndarray) -> np.ndarray:
    """Row-wise sign hash of an (n, d) float matrix into packed uint64 words.

    Strictly positive entries become +1 bits; zero and negative become -1.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValidationError("embedding contains NaN or Inf")
    return pack_bit_rows(values > 0)


def sign_hash(e) -> BinaryCode:
    """Binary code of an embedding: bit i is +1 iff e[i] > 0, else -1."""
    values = as_float_vector(e)
    words = sign_hash_matrix(values[None, :])[0]
    return BinaryCode(dims=values.size, words=words)


def scaled_tanh(e, beta: float) -> DenseVector:
    """Smooth sign relaxation tanh(beta * e); every output lies in (-1, 1)."""
    if not (beta > 0):
        raise ValidationError(f"beta must be > 0, got {beta}")
    return DenseVector(np.tanh(beta * as_float_vector(e)))


def _check_same_dims(a: BinaryCode, b: BinaryCode):
    if a.dims != b.dims:
        raise ValidationError(f"dimension mismatch: {a.dims} != {b.dims}")


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    """Number of differing positions, via popcount of XOR-ed words."""
    _check_same_dims(a, b)
    return int(popcount_words(np.bitwise_xor(a.words, b.words)).sum())


def binary_inner_product(a: BinaryCode, b: BinaryCode) -> int:
    """<a, b> over +/-1 encodings, equal to dims - 2 * hamming_distance."""
    _check_same_dims(a, b)
    return a.dims - 2 * hamming_distance(a, b)


def asymmetric_scores(e: np.ndarray, words: np.ndarray, dims: int) -> np.ndarray:
    """Inner products of one float query against n packed codes.

    Uses 2 * sum(e over set bits) - sum(e) == <e, code> so codes are never
    expanded to +/-1 floats per candidate. einsum (not BLAS matmul) keeps the
    per-row reduction order a function of the row alone, which makes scores
    bit-identical whether a passage is scored inside a candidate subset or
    the full corpus.
    """
    e = np.asarray(e, dtype=np.float64)
    bits = unpack_bit_rows(words, dims)
    return 2.0 * np.einsum("ij,j->i", bits, e) - e.sum()


def asymmetric_inner_product(e, h: BinaryCode) -> float:
    """<e, h> with h in {-1,+1}^d: the reranking score."""
    values = as_float_vector(e)
    if values.size != h.dims:
        raise ValidationError(f"dimension mismatch: {values.size} != {h.dims}")
    return float(asymmetric_scores(values, h.words[None, :], h.dims)[0])
