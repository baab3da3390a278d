"""Recall/latency harness and the sweep runner.

Reports follow one CSV schema: a leading axis column (method or swept
parameter), recall at 1/20/100, median query latency in microseconds and the
exact index payload bytes. Methods that are out of scope (graph and
product-quantization baselines) still emit rows, filled with n/a, so the
table shape stays comparable.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .baselines import exact_search, lsh_hash_matrix, lsh_project, make_lsh_hasher
from .config import EngineConfig, validate_config
from .errors import ValidationError
from .hashing import sign_hash_matrix
from .index import CorpusIndex, HashTable, build_hash_table, index_from_packed
from .model import TwoTowerModel, encode_passages, encode_questions
from .retriever import RetrievalMode, RetrievalRequest, retrieve
from .seeding import derive_seed
from .trainer import TrainConfig, train
from .types import SearchResult, TrainingInstance

DEFAULT_RECALL_KS = (1, 20, 100)
SWEEP_AXES = ("gamma", "l", "alpha", "cand_loss")


def top_k_recall(results: Sequence[SearchResult], relevant, k: int) -> float:
    """1.0 if any relevant id is ranked in the first k results, else 0.0."""
    relevant = set(relevant)
    if not relevant:
        raise ValidationError("relevant set must be non-empty")
    if k > len(results):
        raise ValidationError(f"k={k} exceeds result length {len(results)}")
    return 1.0 if any(r.id in relevant for r in results[:k]) else 0.0


@dataclass
class EvalReport:
    label: str
    recall: Optional[Dict[int, float]]
    mean_latency_us: Optional[float]
    p50_latency_us: Optional[float]
    index_bytes: Optional[int]
    n_queries: int
    config: Dict[str, object]

    @property
    def available(self) -> bool:
        return self.recall is not None


def _recall_over_queries(search_one, query_rows: np.ndarray, relevant, ks) -> Dict[int, float]:
    ks = tuple(sorted(ks))
    totals = {k: 0.0 for k in ks}
    for i in range(query_rows.shape[0]):
        results = search_one(query_rows[i])
        for k in ks:
            totals[k] += top_k_recall(results, relevant[i], k)
    n = query_rows.shape[0]
    return {k: totals[k] / n for k in ks}


def _time_queries(search_one, query_rows: np.ndarray, warmup: int = 10, min_timed: int = 100):
    """Median/mean per-query wall-clock over a cycled single-thread stream."""
    n = query_rows.shape[0]
    for i in range(warmup):
        search_one(query_rows[i % n])
    n_timed = max(min_timed, n)
    samples = np.empty(n_timed)
    for i in range(n_timed):
        row = query_rows[i % n]
        t0 = time.perf_counter()
        search_one(row)
        samples[i] = time.perf_counter() - t0
    return float(samples.mean() * 1e6), float(np.median(samples) * 1e6)


def run_eval(
    index: CorpusIndex,
    table: Optional[HashTable],
    query_embeddings: np.ndarray,
    relevant: Sequence[Sequence[int]],
    l: int,
    ks: Sequence[int] = DEFAULT_RECALL_KS,
    mode: RetrievalMode = RetrievalMode.TWO_STAGE,
    timed: bool = True,
    label: str = "two_stage",
    config: Optional[Dict[str, object]] = None,
) -> EvalReport:
    """Recall at each k plus latency statistics for one retrieval configuration."""
    query_embeddings = np.asarray(query_embeddings, dtype=np.float64)
    if query_embeddings.ndim != 2 or query_embeddings.shape[0] < 1:
        raise ValidationError("query set must be a non-empty (Q, dims) matrix")
    if len(relevant) != query_embeddings.shape[0]:
        raise ValidationError("one relevance list required per query")
    k_max = max(ks)

    def search_one(row):
        req = RetrievalRequest(query_embedding=row, l=l, k=k_max, mode=mode)
        return retrieve(index, table, req)

    recall = _recall_over_queries(search_one, query_embeddings, relevant, ks)
    mean_us, p50_us = _time_queries(search_one, query_embeddings) if timed else (None, None)
    return EvalReport(
        label=label,
        recall=recall,
        mean_latency_us=mean_us,
        p50_latency_us=p50_us,
        index_bytes=index.payload_bytes,
        n_queries=query_embeddings.shape[0],
        config=dict(config or {}),
    )


def _placeholder(label: str, n_queries: int) -> EvalReport:
    return EvalReport(
        label=label, recall=None, mean_latency_us=None, p50_latency_us=None,
        index_bytes=None, n_queries=n_queries, config={},
    )


def run_benchmark(
    model: TwoTowerModel,
    corpus_features: np.ndarray,
    query_features: np.ndarray,
    relevant: Sequence[Sequence[int]],
    cfg: EngineConfig,
    ks: Sequence[int] = DEFAULT_RECALL_KS,
    timed: bool = True,
    lsh_seed: Optional[int] = None,
) -> List[EvalReport]:
    """Method-comparison table: exact float search, random-hyperplane hashing,
    the two-stage engine with both candidate generators, and n/a placeholders
    for the out-of-scope graph/quantization baselines."""
    validate_config(cfg)
    e_p = encode_passages(model, corpus_features)
    e_q = encode_questions(model, query_features)
    n, d = e_p.shape
    n_queries = e_q.shape[0]
    l = min(cfg.candidates, n)

    index = index_from_packed(d, sign_hash_matrix(e_p))
    table = build_hash_table(index, cfg.hash_bits)

    ks = tuple(sorted(ks))
    k_max = max(ks)
    reports: List[EvalReport] = []

    def exact_one(row):
        return exact_search(e_p, row, k_max)

    recall = _recall_over_queries(exact_one, e_q, relevant, ks)
    mean_us, p50_us = _time_queries(exact_one, e_q) if timed else (None, None)
    reports.append(EvalReport(
        label="exact_float", recall=recall, mean_latency_us=mean_us,
        p50_latency_us=p50_us, index_bytes=n * d * 4, n_queries=n_queries,
        config={"note": "float32-equivalent accounting"},
    ))
    reports.append(_placeholder("hnsw", n_queries))

    hasher = make_lsh_hasher(d, d, derive_seed(cfg.seed if lsh_seed is None else lsh_seed, "lsh"))
    lsh_index = index_from_packed(d, lsh_hash_matrix(hasher, e_p))
    lsh_queries = lsh_project(hasher, e_q)
    reports.append(run_eval(
        lsh_index, None, lsh_queries, relevant, l, ks=ks, timed=timed, label="lsh",
    ))
    reports.append(_placeholder("pq", n_queries))

    reports.append(run_eval(
        index, None, e_q, relevant, l, ks=ks, timed=timed, label="two_stage_scan",
    ))
    reports.append(run_eval(
        index, table, e_q, relevant, l, ks=ks, timed=timed, label="two_stage_hash",
    ))
    return reports


def _train_and_eval(
    dataset: Sequence[TrainingInstance],
    corpus_features: np.ndarray,
    query_features: np.ndarray,
    relevant,
    train_cfg: TrainConfig,
    l: int,
    ks,
    timed: bool,
    label: str,
    config: Dict[str, object],
) -> EvalReport:
    result = train(dataset, train_cfg)
    e_p = encode_passages(result.model, corpus_features)
    index = index_from_packed(result.model.code_dims, sign_hash_matrix(e_p))
    e_q = encode_questions(result.model, query_features)
    return run_eval(
        index, None, e_q, relevant, min(l, index.count), ks=ks, timed=timed,
        label=label, config=config,
    )


def run_sweep(
    axis: str,
    grid: Sequence,
    dataset: Sequence[TrainingInstance],
    corpus_features: np.ndarray,
    query_features: np.ndarray,
    relevant: Sequence[Sequence[int]],
    train_cfg: TrainConfig,
    engine_cfg: EngineConfig,
    ks: Sequence[int] = DEFAULT_RECALL_KS,
    timed: bool = True,
) -> List[EvalReport]:
    """One EvalReport per grid point along gamma, l, alpha or cand_loss."""
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if len(grid) == 0:
        raise ValidationError("sweep grid must be non-empty")
    reports = []
    if axis == "l":
        result = train(dataset, train_cfg)
        e_p = encode_passages(result.model, corpus_features)
        index = index_from_packed(result.model.code_dims, sign_hash_matrix(e_p))
        e_q = encode_questions(result.model, query_features)
        for l in grid:
            l = int(l)
            reports.append(run_eval(
                index, None, e_q, relevant, min(l, index.count), ks=ks, timed=timed,
                label=f"l={l}", config={"l": l},
            ))
        return reports

    for value in grid:
        if axis == "gamma":
            cfg = replace(train_cfg, gamma=float(value))
        elif axis == "alpha":
            cfg = replace(train_cfg, alpha=float(value))
        else:
            cfg = replace(train_cfg, cand_loss=str(value))
        reports.append(_train_and_eval(
            dataset, corpus_features, query_features, relevant, cfg,
            engine_cfg.candidates, ks, timed, f"{axis}={value}", {axis: value},
        ))
    return reports


def write_report_csv(reports: Sequence[EvalReport], path, axis_name: str = "method",
                     ks: Sequence[int] = DEFAULT_RECALL_KS):
    """Fixed-schema CSV: axis, recall@k columns, p50 latency, index bytes."""
    ks = tuple(sorted(ks))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([axis_name, *(f"recall@{k}" for k in ks), "p50_latency_us", "index_bytes"])
        for rep in reports:
            if not rep.available:
                writer.writerow([rep.label] + ["n/a"] * (len(ks) + 2))
                continue
            lat = "n/a" if rep.p50_latency_us is None else f"{rep.p50_latency_us:.1f}"
            writer.writerow([
                rep.label,
                *(f"{rep.recall[k]:.6f}" for k in ks),
                lat,
                rep.index_bytes,
            ])
