"""Two-stage retrieval: Hamming candidate generation, then float-by-binary
reranking of the candidate pool, with ablation switches for either stage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from .errors import ValidationError
from .hashing import asymmetric_scores, popcount_words, sign_hash
from .index import CorpusIndex, HashTable, lookup_candidates, scan_candidates
from .types import BinaryCode, SearchResult, as_float_vector


class RetrievalMode(str, Enum):
    TWO_STAGE = "two_stage"
    NO_RERANK = "no_rerank"
    NO_CANDIDATE_GENERATION = "no_candidate_generation"


@dataclass
class RetrievalRequest:
    query_embedding: object  # DenseVector or array-like
    l: int
    k: int
    mode: RetrievalMode = RetrievalMode.TWO_STAGE
    query_code: Optional[BinaryCode] = None


def derive_query_code(e_q) -> BinaryCode:
    """Binary query code from the float embedding (strict-positive sign rule)."""
    return sign_hash(e_q)


def _top_k_by_score(ids: np.ndarray, scores: np.ndarray, k: int):
    """Exact top-k under (score desc, id asc), including ties at the cutoff."""
    neg = -scores
    if k < neg.size:
        kth = np.partition(neg, k - 1)[k - 1]
        better = np.flatnonzero(neg < kth)
        ties = np.flatnonzero(neg == kth)
        ties = ties[np.argsort(ids[ties], kind="stable")]
        sel = np.concatenate([better, ties[: k - better.size]])
    else:
        sel = np.arange(neg.size)
    sel = sel[np.lexsort((ids[sel], neg[sel]))]
    return ids[sel], scores[sel]


def retrieve(
    index: CorpusIndex,
    table: Optional[HashTable],
    req: RetrievalRequest,
) -> List[SearchResult]:
    """Run one retrieval request against an index.

    two_stage: generate l candidates by Hamming distance (hash lookup when a
    table is supplied, linear scan otherwise), rerank them by the inner product
    of the float query against each candidate code, return the top-k.
    no_rerank: top-k of the candidate stage ordered by (hamming, id).
    no_candidate_generation: score the entire corpus, return the top-k.
    """
    e_q = as_float_vector(req.query_embedding)
    if e_q.size != index.dims:
        raise ValidationError(f"query dims {e_q.size} != index dims {index.dims}")
    h_q = req.query_code if req.query_code is not None else derive_query_code(e_q)
    if h_q.dims != index.dims:
        raise ValidationError(f"query code dims {h_q.dims} != index dims {index.dims}")
    try:
        mode = RetrievalMode(req.mode)
    except ValueError as exc:
        raise ValidationError(f"unknown retrieval mode {req.mode!r}") from exc
    n = index.count
    if req.k < 1:
        raise ValidationError(f"k must be >= 1, got {req.k}")
    if mode is not RetrievalMode.NO_CANDIDATE_GENERATION:
        if req.l < 1:
            raise ValidationError(f"l must be >= 1, got {req.l}")
        if mode is RetrievalMode.TWO_STAGE and req.k > req.l:
            raise ValidationError(f"k exceeds l: {req.k} > {req.l}")
    if req.k > n:
        raise ValidationError(f"k={req.k} exceeds corpus size {n}")

    if mode is RetrievalMode.NO_CANDIDATE_GENERATION:
        scores = asymmetric_scores(e_q, index.words, index.dims)
        ids, top_scores = _top_k_by_score(np.arange(n, dtype=np.int64), scores, req.k)
        hamming = popcount_words(np.bitwise_xor(index.words[ids], h_q.words)).sum(
            axis=1, dtype=np.int64
        )
        return [
            SearchResult(id=int(i), hamming=int(d), score=float(s))
            for i, d, s in zip(ids, hamming, top_scores)
        ]

    l_eff = min(req.l, n)  # desk-scale corpora may be smaller than l
    if table is not None:
        cand_ids, cand_dist = lookup_candidates(index, table, h_q.words, l_eff)
    else:
        cand_ids, cand_dist = scan_candidates(index, h_q.words, l_eff)

    if mode is RetrievalMode.NO_RERANK:
        take = min(req.k, cand_ids.size)
        return [
            SearchResult(id=int(i), hamming=int(d))
            for i, d in zip(cand_ids[:take], cand_dist[:take])
        ]

    scores = asymmetric_scores(e_q, index.words[cand_ids], index.dims)
    dist_by_pos = {int(i): int(d) for i, d in zip(cand_ids, cand_dist)}
    ids, top_scores = _top_k_by_score(cand_ids, scores, req.k)
    return [
        SearchResult(id=int(i), hamming=dist_by_pos[int(i)], score=float(s))
        for i, s in zip(ids, top_scores)
    ]
