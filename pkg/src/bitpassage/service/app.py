"""FastAPI application wrapping the retrieval engine.

Index/model artifacts are loaded into named engines held in app state; search
requests run read-only against them, so any number of clients may query
concurrently. Artifact-producing endpoints (generate/train/build) run
synchronously at desk scale and write the same manifests as the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__
from ..datagen import GenConfig
from ..errors import ConfigError, DataError, FormatError, ValidationError
from ..index import CorpusIndex, HashTable, build_hash_table, load_index
from ..model import TwoTowerModel, encode_questions, load_model
from ..pipelines import build_index_pipeline, generate_dataset, train_pipeline
from ..retriever import RetrievalRequest, retrieve
from ..trainer import TrainConfig
from . import schemas


@dataclass
class LoadedEngine:
    name: str
    index: CorpusIndex
    table: Optional[HashTable]
    model: Optional[TwoTowerModel]
    hash_bits: Optional[int]

    def info(self) -> schemas.EngineInfo:
        return schemas.EngineInfo(
            name=self.name,
            count=self.index.count,
            dims=self.index.dims,
            payload_bytes=self.index.payload_bytes,
            has_model=self.model is not None,
            hash_bits=self.hash_bits,
        )


def create_app() -> FastAPI:
    app = FastAPI(title="bitpassage", version=__version__)
    engines: Dict[str, LoadedEngine] = {}
    app.state.engines = engines

    @app.exception_handler(ValidationError)
    @app.exception_handler(ConfigError)
    def _invalid(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(DataError)
    @app.exception_handler(FormatError)
    def _bad_data(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/data/generate", response_model=schemas.GenerateDataResponse)
    def generate_data(req: schemas.GenerateDataRequest):
        cfg = GenConfig(
            n_passages=req.n_passages,
            input_dims=req.input_dims,
            clusters=req.clusters,
            cluster_noise=req.cluster_noise,
            feature_noise=req.feature_noise,
            hard_negative_scale=req.hard_negative_scale,
            train_instances=req.train_instances,
            eval_queries=req.eval_queries,
            seed=req.seed,
        )
        out = generate_dataset(cfg, req.out_dir)
        return schemas.GenerateDataResponse(
            corpus_path=str(out.corpus_path),
            train_path=str(out.train_path),
            queries_path=str(out.queries_path),
            manifest_path=str(out.manifest_path),
            n_passages=out.n_passages,
            train_instances=out.train_instances,
            eval_queries=out.eval_queries,
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_model(req: schemas.TrainRequest):
        cfg = TrainConfig(
            epochs=req.epochs,
            batch_size=req.batch_size,
            lr=req.lr,
            warmup_ratio=req.warmup_ratio,
            weight_decay=req.weight_decay,
            gamma=req.gamma,
            alpha=req.alpha,
            cand_loss=req.cand_loss,
            in_batch_negatives=req.in_batch_negatives,
            seed=req.seed,
            code_dims=req.code_dims,
            init_scale=req.init_scale,
        )
        out = train_pipeline(req.data_path, cfg, req.out_path)
        return schemas.TrainResponse(
            checkpoint_path=str(out.checkpoint_path),
            loss_trace_path=str(out.loss_trace_path),
            manifest_path=str(out.manifest_path),
            steps=out.steps,
            final_loss=out.final_loss,
            final_beta=out.final_beta,
        )

    @app.post("/index/build", response_model=schemas.BuildIndexResponse)
    def build_index_endpoint(req: schemas.BuildIndexRequest):
        out = build_index_pipeline(
            req.model_path, req.corpus_path, req.out_path,
            hash_bits=req.hash_bits, seed=req.seed,
        )
        return schemas.BuildIndexResponse(
            index_path=str(out.index_path),
            manifest_path=str(out.manifest_path),
            count=out.count,
            dims=out.dims,
            payload_bytes=out.payload_bytes,
            checksum=out.checksum,
        )

    @app.get("/engines", response_model=schemas.EngineListResponse)
    def list_engines():
        return schemas.EngineListResponse(
            engines=[engines[name].info() for name in sorted(engines)]
        )

    @app.post("/engines", response_model=schemas.EngineInfo)
    def load_engine(req: schemas.LoadEngineRequest):
        index = load_index(req.index_path)
        model = load_model(req.model_path) if req.model_path else None
        if model is not None and model.code_dims != index.dims:
            raise ValidationError(
                f"model code dims {model.code_dims} != index dims {index.dims}"
            )
        table = build_hash_table(index, req.hash_bits) if req.hash_bits else None
        engines[req.name] = LoadedEngine(
            name=req.name, index=index, table=table, model=model, hash_bits=req.hash_bits,
        )
        return engines[req.name].info()

    @app.delete("/engines/{name}")
    def unload_engine(name: str):
        if name not in engines:
            raise HTTPException(status_code=404, detail=f"engine {name!r} not loaded")
        del engines[name]
        return {"unloaded": name}

    @app.post("/engines/{name}/search", response_model=schemas.SearchResponse)
    def search(name: str, req: schemas.SearchRequest):
        if name not in engines:
            raise HTTPException(status_code=404, detail=f"engine {name!r} not loaded")
        eng = engines[name]
        rows = np.asarray(req.queries, dtype=np.float64)
        if rows.ndim != 2:
            raise ValidationError("queries must be a list of equal-length vectors")
        if req.queries_are_embeddings or eng.model is None:
            if rows.shape[1] != eng.index.dims:
                raise ValidationError(
                    f"embedding dims {rows.shape[1]} != index dims {eng.index.dims}"
                )
            embeddings = rows
        else:
            embeddings = encode_questions(eng.model, rows)
        if req.algo not in ("scan", "hash"):
            raise ValidationError(f"algo must be 'scan' or 'hash', got {req.algo!r}")
        table = None
        if req.algo == "hash":
            if eng.table is None:
                raise ValidationError(
                    f"engine {name!r} was loaded without hash_bits; cannot use algo='hash'"
                )
            table = eng.table
        results = []
        for row in embeddings:
            hits = retrieve(eng.index, table, RetrievalRequest(
                query_embedding=row, l=req.l, k=req.k, mode=req.mode,
            ))
            results.append([
                schemas.SearchHitModel(rank=r + 1, id=h.id, hamming=h.hamming, score=h.score)
                for r, h in enumerate(hits)
            ])
        return schemas.SearchResponse(mode=req.mode, algo=req.algo, results=results)

    return app


app = create_app()
