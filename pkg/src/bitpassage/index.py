"""Immutable packed-code corpus index with two candidate-generation algorithms.

Candidate generation is either a chunked popcount linear scan or a prefix-key
hash-table lookup with Hamming-radius expansion. Both return the same answer
set for the same inputs; ties at the cutoff always break by ascending id.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .errors import ValidationError
from .hashing import popcount_words
from .serialization import read_envelope, write_envelope
from .types import BinaryCode, SearchResult, words_per_code

INDEX_MAGIC = b"BPRIDX01"
INDEX_VERSION = 1

# Rows per XOR/popcount block; keeps the working set inside the cache
# instead of streaming a full N x W temporary through memory.
_CHUNK_ROWS = 16384


def _max_threads() -> int:
    try:
        return max(1, int(os.environ.get("BPR_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class CorpusIndex:
    """N packed binary codes with implicit ids [0, N)."""

    dims: int
    words: np.ndarray  # (N, words_per_code(dims)) uint64, row-major

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[0] < 1:
            raise ValidationError("index must contain at least one code")
        if words.shape[1] != words_per_code(self.dims):
            raise ValidationError(
                f"expected {words_per_code(self.dims)} words per code, got {words.shape[1]}"
            )
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @property
    def count(self) -> int:
        return int(self.words.shape[0])

    @property
    def payload_bytes(self) -> int:
        return int(self.words.nbytes)

    def code_at(self, i: int) -> BinaryCode:
        if not (0 <= i < self.count):
            raise ValidationError(f"id {i} out of range [0, {self.count})")
        return BinaryCode(dims=self.dims, words=self.words[i].copy())


def build_index(codes: Sequence[BinaryCode]) -> CorpusIndex:
    """Stack codes into an index; all codes must share one dimensionality."""
    if len(codes) == 0:
        raise ValidationError("cannot build an index from an empty code list")
    dims = codes[0].dims
    if any(c.dims != dims for c in codes):
        raise ValidationError("all codes must share one dims")
    return CorpusIndex(dims=dims, words=np.stack([c.words for c in codes]))


def index_from_packed(dims: int, words: np.ndarray) -> CorpusIndex:
    """Wrap an already-packed (N, W) uint64 matrix without copying per code."""
    return CorpusIndex(dims=dims, words=words)


def _check_query(index: CorpusIndex, q: BinaryCode, l: int):
    if q.dims != index.dims:
        raise ValidationError(f"query dims {q.dims} != index dims {index.dims}")
    if not (1 <= l <= index.count):
        raise ValidationError(f"l={l} out of range [1, {index.count}]")


def _distances_block(words: np.ndarray, q_words: np.ndarray) -> np.ndarray:
    """Hamming distances of every row against one query, chunked popcount."""
    n, w = words.shape
    dist = np.empty(n, dtype=np.int64)
    buf = np.empty((min(_CHUNK_ROWS, n), w), dtype=np.uint64)
    for i in range(0, n, _CHUNK_ROWS):
        j = min(i + _CHUNK_ROWS, n)
        block = buf[: j - i]
        np.bitwise_xor(words[i:j], q_words, out=block)
        dist[i:j] = popcount_words(block).sum(axis=1, dtype=np.int64)
    return dist


def _top_by_key(ids: np.ndarray, dist: np.ndarray, l: int, total: int):
    """Smallest-l selection under the total order (hamming, id)."""
    key = dist * np.int64(total) + ids
    if l < key.size:
        sel = np.argpartition(key, l - 1)[:l]
    else:
        sel = np.arange(key.size)
    order = np.argsort(key[sel], kind="stable")
    sel = sel[order]
    return ids[sel], dist[sel]


def scan_candidates(
    index: CorpusIndex, q_words: np.ndarray, l: int, shards: int = 1
):
    """Array-level linear scan: the l ids closest to the query by (hamming, id).

    The corpus is split into contiguous shards scanned independently (optionally
    on a thread pool capped by BPR_THREADS) and merged deterministically.
    """
    n = index.count
    shards = max(1, min(int(shards), n))
    bounds = np.linspace(0, n, shards + 1, dtype=np.int64)

    def scan_shard(s):
        lo, hi = int(bounds[s]), int(bounds[s + 1])
        dist = _distances_block(index.words[lo:hi], q_words)
        ids = np.arange(lo, hi, dtype=np.int64)
        return _top_by_key(ids, dist, min(l, hi - lo), n)

    workers = min(shards, _max_threads())
    if shards == 1:
        parts = [scan_shard(0)]
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(scan_shard, range(shards)))
    else:
        parts = [scan_shard(s) for s in range(shards)]

    if len(parts) == 1:
        return parts[0]
    ids = np.concatenate([p[0] for p in parts])
    dist = np.concatenate([p[1] for p in parts])
    return _top_by_key(ids, dist, l, n)


def _as_results(ids: np.ndarray, dist: np.ndarray) -> List[SearchResult]:
    return [SearchResult(id=int(i), hamming=int(d)) for i, d in zip(ids, dist)]


def linear_scan(index: CorpusIndex, q: BinaryCode, l: int, shards: int = 1) -> List[SearchResult]:
    """Exact top-l by Hamming distance, sorted ascending by (hamming, id)."""
    _check_query(index, q, l)
    ids, dist = scan_candidates(index, q.words, l, shards=shards)
    return _as_results(ids, dist)


@dataclass(frozen=True, eq=False)
class HashTable:
    """Buckets of passage ids keyed by the first hash_bits bits of each code."""

    hash_bits: int
    buckets: Dict[int, np.ndarray]
    # distinct keys and their bucket sizes, aligned, for vectorized radius grouping
    distinct_keys: np.ndarray
    bucket_sizes: np.ndarray

    def pool_at_radius(self, query_key: int, radius: int) -> np.ndarray:
        """All member ids of buckets whose key lies within prefix-Hamming radius."""
        dist = popcount_words(self.distinct_keys ^ np.uint64(query_key))
        keys = self.distinct_keys[dist <= radius]
        if keys.size == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([self.buckets[int(k)] for k in keys])


def prefix_key(words: np.ndarray, bits: int) -> np.ndarray:
    """First-bits prefix of each code (dimension 0 is the key's lowest bit)."""
    mask = np.uint64((1 << bits) - 1)
    return words[..., 0] & mask


def build_hash_table(index: CorpusIndex, b: int) -> HashTable:
    """Bucket every id under its b-bit code prefix."""
    if not (1 <= b <= min(index.dims, 30)):
        raise ValidationError(f"hash_bits out of range: {b} not in [1, {min(index.dims, 30)}]")
    keys = prefix_key(index.words, b)
    order = np.argsort(keys, kind="stable")  # ascending id within each bucket
    sorted_keys = keys[order]
    distinct, starts = np.unique(sorted_keys, return_index=True)
    bounds = np.append(starts, keys.size)
    ids = order.astype(np.int64)
    buckets = {
        int(k): ids[bounds[i]:bounds[i + 1]] for i, k in enumerate(distinct)
    }
    sizes = np.diff(bounds)
    return HashTable(hash_bits=b, buckets=buckets, distinct_keys=distinct, bucket_sizes=sizes)


def lookup_candidates(index: CorpusIndex, table: HashTable, q_words: np.ndarray, l: int):
    """Array-level hash lookup: radius-expanded pool, then exact top-l refine.

    Grows the prefix radius r = 0, 1, 2, ... until the pooled bucket members
    reach l (guaranteed once r covers all keys), then ranks the pool by full
    Hamming distance with ties broken by ascending id.
    """
    qkey = int(prefix_key(q_words[None, :], table.hash_bits)[0])
    key_dist = popcount_words(table.distinct_keys ^ np.uint64(qkey)).astype(np.int64)
    # cumulative pool size per radius; the stopping radius is the first >= l
    counts = np.bincount(key_dist, weights=table.bucket_sizes, minlength=table.hash_bits + 1)
    cum = np.cumsum(counts)
    radius = int(np.searchsorted(cum, l))
    pool = table.pool_at_radius(qkey, radius)
    dist = _distances_block(index.words[pool], q_words)
    take = min(l, pool.size)
    return _top_by_key(pool, dist, take, index.count)


def hash_lookup(index: CorpusIndex, table: HashTable, q: BinaryCode, l: int) -> List[SearchResult]:
    """Top-l by (hamming, id) among the radius-expanded candidate pool."""
    _check_query(index, q, l)
    ids, dist = lookup_candidates(index, table, q.words, l)
    return _as_results(ids, dist)


def save_index(index: CorpusIndex, path):
    payload = index.words.astype("<u8", copy=False).tobytes()
    write_envelope(path, INDEX_MAGIC, INDEX_VERSION, index.dims, index.count, payload)


def load_index(path) -> CorpusIndex:
    def payload_size(dims, count):
        return count * words_per_code(dims) * 8

    dims, count, payload = read_envelope(path, INDEX_MAGIC, INDEX_VERSION, payload_size)
    words = np.frombuffer(payload, dtype="<u8").astype(np.uint64, copy=True)
    return CorpusIndex(dims=int(dims), words=words.reshape(int(count), words_per_code(int(dims))))
