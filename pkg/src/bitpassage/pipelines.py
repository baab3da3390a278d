"""End-to-end command implementations shared by the CLI and the HTTP service.

Every pipeline resolves its configuration, runs the underlying modules, writes
its artifacts plus one manifest, and returns a small outcome record. All
randomness flows from the single seed in the configuration.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import EngineConfig, validate_config
from .datagen import GenConfig, generate
from .dataio import (
    load_corpus_file,
    load_query_file,
    load_training_file,
    load_vector_file,
    write_corpus_file,
    write_query_file,
    write_training_file,
)
from .errors import ValidationError
from .evaluation import (
    DEFAULT_RECALL_KS,
    EvalReport,
    run_benchmark,
    run_eval,
    run_sweep,
    write_report_csv,
)
from .hashing import sign_hash_matrix
from .index import CorpusIndex, build_hash_table, index_from_packed, load_index, save_index
from .manifest import RunManifest, manifest_path_for, write_manifest
from .model import TwoTowerModel, encode_passages, encode_questions, load_model, save_model
from .retriever import RetrievalMode, RetrievalRequest, retrieve
from .serialization import fnv1a64
from .trainer import TrainConfig, train, validate_train_config


def _finish(command, config, seed, inputs, outputs, started, stats=None) -> Path:
    manifest = RunManifest(
        command=command,
        config=config,
        seed=seed,
        inputs={k: str(v) for k, v in inputs.items()},
        outputs={k: str(v) for k, v in outputs.items()},
        version=f"bitpassage-{__version__}",
        duration_s=round(time.perf_counter() - started, 6),
        stats=stats or {},
    )
    primary = next(iter(outputs.values()))
    return write_manifest(manifest, manifest_path_for(primary))


@dataclass
class GenerateOutcome:
    corpus_path: Path
    train_path: Path
    queries_path: Path
    manifest_path: Path
    n_passages: int
    train_instances: int
    eval_queries: int


def generate_dataset(cfg: GenConfig, out_dir) -> GenerateOutcome:
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate(cfg)
    corpus_path = out_dir / "corpus.jsonl"
    train_path = out_dir / "train.jsonl"
    queries_path = out_dir / "queries.jsonl"
    write_corpus_file(corpus_path, data.corpus_features, data.corpus_payloads)
    write_training_file(train_path, data.train)
    write_query_file(queries_path, data.query_ids, data.query_features, data.relevant)
    manifest_path = _finish(
        "gen-data", asdict(cfg), cfg.seed, {},
        {"corpus": corpus_path, "train": train_path, "queries": queries_path},
        started,
    )
    return GenerateOutcome(
        corpus_path=corpus_path, train_path=train_path, queries_path=queries_path,
        manifest_path=manifest_path, n_passages=cfg.n_passages,
        train_instances=cfg.train_instances, eval_queries=cfg.eval_queries,
    )


@dataclass
class TrainOutcome:
    checkpoint_path: Path
    loss_trace_path: Path
    manifest_path: Path
    epochs: int
    steps: int
    final_loss: float
    final_beta: float


def train_pipeline(data_path, cfg: TrainConfig, out_path) -> TrainOutcome:
    started = time.perf_counter()
    validate_train_config(cfg)
    dataset = load_training_file(data_path)
    result = train(dataset, cfg)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out_path)
    trace_path = out_path.parent / (out_path.stem + ".loss.csv")
    with open(trace_path, "w") as f:
        f.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(result.epoch_losses):
            f.write(f"{epoch},{loss!r}\n")
    final_beta = result.beta_trace[-1] if result.beta_trace else 1.0
    manifest_path = _finish(
        "train", asdict(cfg), cfg.seed, {"data": data_path},
        {"checkpoint": out_path, "loss_trace": trace_path},
        started,
        stats={"steps": result.steps, "final_loss": result.final_loss, "final_beta": final_beta},
    )
    return TrainOutcome(
        checkpoint_path=out_path, loss_trace_path=trace_path, manifest_path=manifest_path,
        epochs=cfg.epochs, steps=result.steps, final_loss=result.final_loss,
        final_beta=final_beta,
    )


@dataclass
class BuildIndexOutcome:
    index_path: Path
    manifest_path: Path
    count: int
    dims: int
    payload_bytes: int
    checksum: str


def build_index_pipeline(model_path, corpus_path, out_path, hash_bits: Optional[int] = None,
                         seed: int = 0) -> BuildIndexOutcome:
    started = time.perf_counter()
    model = load_model(model_path)
    features, _ = load_corpus_file(corpus_path)
    if features.shape[1] != model.input_dims:
        raise ValidationError(
            f"corpus feature dims {features.shape[1]} != model input dims {model.input_dims}"
        )
    codes = sign_hash_matrix(encode_passages(model, features))
    index = index_from_packed(model.code_dims, codes)
    if hash_bits is not None:
        build_hash_table(index, hash_bits)  # validates the bits against dims
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, out_path)
    checksum = f"{fnv1a64(index.words.astype('<u8', copy=False).tobytes()):#018x}"
    manifest_path = _finish(
        "build-index",
        {"hash_bits": hash_bits, "dims": index.dims},
        seed,
        {"model": model_path, "corpus": corpus_path},
        {"index": out_path},
        started,
        stats={"count": index.count, "payload_bytes": index.payload_bytes, "checksum": checksum},
    )
    return BuildIndexOutcome(
        index_path=out_path, manifest_path=manifest_path, count=index.count,
        dims=index.dims, payload_bytes=index.payload_bytes, checksum=checksum,
    )


@dataclass
class SearchHit:
    rank: int
    id: int
    hamming: Optional[int]
    score: Optional[float]


@dataclass
class SearchOutcome:
    queries: List[List[SearchHit]]
    mode: str
    algo: str


def run_search(
    index: CorpusIndex,
    model: Optional[TwoTowerModel],
    query_rows: np.ndarray,
    l: int,
    k: int,
    mode: str = "two_stage",
    algo: str = "scan",
    hash_bits: int = 20,
    queries_are_embeddings: bool = False,
) -> SearchOutcome:
    """Search an in-memory index; query rows are raw features unless flagged
    as already-encoded embeddings (required when no model is supplied)."""
    if algo not in ("scan", "hash"):
        raise ValidationError(f"algo must be 'scan' or 'hash', got {algo!r}")
    try:
        mode = RetrievalMode(mode)
    except ValueError as exc:
        raise ValidationError(f"unknown retrieval mode {mode!r}") from exc
    if model is None and not queries_are_embeddings:
        raise ValidationError("no model supplied; query vectors must be embeddings")
    if queries_are_embeddings:
        embeddings = np.asarray(query_rows, dtype=np.float64)
    else:
        embeddings = encode_questions(model, query_rows)
    table = build_hash_table(index, hash_bits) if algo == "hash" else None
    out = []
    for row in embeddings:
        results = retrieve(index, table, RetrievalRequest(
            query_embedding=row, l=l, k=k, mode=mode,
        ))
        out.append([
            SearchHit(rank=r + 1, id=res.id, hamming=res.hamming, score=res.score)
            for r, res in enumerate(results)
        ])
    return SearchOutcome(queries=out, mode=mode.value, algo=algo)


def search_pipeline(index_path, model_path, queries_path, l, k,
                    mode="two_stage", algo="scan", hash_bits: int = 20,
                    queries_are_embeddings: bool = False) -> SearchOutcome:
    index = load_index(index_path)
    model = load_model(model_path) if model_path else None
    rows = load_vector_file(queries_path)
    return run_search(
        index, model, rows, l, k, mode=mode, algo=algo, hash_bits=hash_bits,
        queries_are_embeddings=queries_are_embeddings,
    )


@dataclass
class ReportOutcome:
    report_path: Path
    manifest_path: Path
    rows: List[EvalReport]


def eval_pipeline(
    model_path, corpus_path, queries_path, out_path,
    cfg: EngineConfig, ks: Sequence[int] = DEFAULT_RECALL_KS, timed: bool = True,
    with_ablations: bool = True,
) -> ReportOutcome:
    """Benchmark table (methods + n/a placeholders) plus the two ablation rows."""
    started = time.perf_counter()
    validate_config(cfg)
    model = load_model(model_path)
    corpus_features, _ = load_corpus_file(corpus_path)
    _, query_features, relevant = load_query_file(queries_path)
    if any(len(r) == 0 for r in relevant):
        raise ValidationError("every eval query needs at least one relevant id")
    reports = run_benchmark(
        model, corpus_features, query_features, relevant, cfg, ks=ks, timed=timed,
    )
    if with_ablations:
        e_p = encode_passages(model, corpus_features)
        e_q = encode_questions(model, query_features)
        index = index_from_packed(model.code_dims, sign_hash_matrix(e_p))
        l = min(cfg.candidates, index.count)
        reports.append(run_eval(
            index, None, e_q, relevant, l, ks=ks, timed=timed, label="no_rerank",
            mode=RetrievalMode.NO_RERANK,
        ))
        reports.append(run_eval(
            index, None, e_q, relevant, l, ks=ks, timed=timed,
            label="no_candidate_generation", mode=RetrievalMode.NO_CANDIDATE_GENERATION,
        ))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out_path, axis_name="method", ks=ks)
    manifest_path = _finish(
        "eval", {**asdict(cfg), "ks": list(ks), "timed": timed}, cfg.seed,
        {"model": model_path, "corpus": corpus_path, "queries": queries_path},
        {"report": out_path}, started,
    )
    return ReportOutcome(report_path=out_path, manifest_path=manifest_path, rows=reports)


def parse_grid(grid: str):
    """Parse an axis=v1,v2,... sweep grid string."""
    if "=" not in grid:
        raise ValidationError(f"grid must look like axis=v1,v2,..., got {grid!r}")
    axis, _, values = grid.partition("=")
    axis = axis.strip()
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ValidationError("sweep grid must be non-empty")
    if axis in ("gamma", "alpha"):
        return axis, [float(v) for v in items]
    if axis == "l":
        return axis, [int(v) for v in items]
    if axis == "cand_loss":
        return axis, items
    raise ValidationError(f"unknown sweep axis {axis!r}")


def sweep_pipeline(
    grid: str, data_path, corpus_path, queries_path, out_path,
    train_cfg: TrainConfig, engine_cfg: EngineConfig,
    ks: Sequence[int] = DEFAULT_RECALL_KS, timed: bool = True,
) -> ReportOutcome:
    started = time.perf_counter()
    axis, values = parse_grid(grid)
    dataset = load_training_file(data_path)
    corpus_features, _ = load_corpus_file(corpus_path)
    _, query_features, relevant = load_query_file(queries_path)
    reports = run_sweep(
        axis, values, dataset, corpus_features, query_features, relevant,
        train_cfg, engine_cfg, ks=ks, timed=timed,
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out_path, axis_name=axis, ks=ks)
    manifest_path = _finish(
        "sweep",
        {"grid": grid, "train": asdict(train_cfg), "engine": asdict(engine_cfg),
         "ks": list(ks), "timed": timed},
        train_cfg.seed,
        {"data": data_path, "corpus": corpus_path, "queries": queries_path},
        {"report": out_path}, started,
    )
    return ReportOutcome(report_path=out_path, manifest_path=manifest_path, rows=reports)
