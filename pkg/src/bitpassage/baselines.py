"""Data-independent baselines: random-hyperplane hashing and the exact
float brute-force search both retrieval paths are judged against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import ValidationError
from .hashing import sign_hash_matrix
from .retriever import _top_k_by_score
from .types import BinaryCode, SearchResult, as_float_vector


@dataclass(frozen=True)
class LshHasher:
    """Signs of fixed Gaussian projections; seed-deterministic."""

    projection: np.ndarray  # (code_dims, input_dims)

    @property
    def input_dims(self) -> int:
        return int(self.projection.shape[1])

    @property
    def code_dims(self) -> int:
        return int(self.projection.shape[0])


def make_lsh_hasher(input_dims: int, code_dims: int, seed: int) -> LshHasher:
    rng = np.random.default_rng(seed)
    return LshHasher(projection=rng.standard_normal((code_dims, input_dims)))


def lsh_project(hasher: LshHasher, embeddings: np.ndarray) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[-1] != hasher.input_dims:
        raise ValidationError(
            f"embedding dims {embeddings.shape[-1]} != projection input {hasher.input_dims}"
        )
    return embeddings @ hasher.projection.T


def lsh_hash_matrix(hasher: LshHasher, embeddings: np.ndarray) -> np.ndarray:
    """Packed codes for a batch of embeddings."""
    return sign_hash_matrix(lsh_project(hasher, embeddings))


def lsh_hash(hasher: LshHasher, e) -> BinaryCode:
    """sign(projection @ e) as a packed code."""
    values = as_float_vector(e)
    words = lsh_hash_matrix(hasher, values[None, :])[0]
    return BinaryCode(dims=hasher.code_dims, words=words)


def exact_search(embeddings: np.ndarray, e_q, k: int) -> List[SearchResult]:
    """Top-k by float inner product (score desc, id asc); the exact oracle."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 1:
        raise ValidationError("embeddings must be a non-empty (N, dims) matrix")
    e_q = as_float_vector(e_q)
    if e_q.size != embeddings.shape[1]:
        raise ValidationError(f"query dims {e_q.size} != corpus dims {embeddings.shape[1]}")
    if not (1 <= k <= embeddings.shape[0]):
        raise ValidationError(f"k={k} out of range [1, {embeddings.shape[0]}]")
    scores = embeddings @ e_q
    ids, top = _top_k_by_score(np.arange(embeddings.shape[0], dtype=np.int64), scores, k)
    return [SearchResult(id=int(i), score=float(s)) for i, s in zip(ids, top)]
