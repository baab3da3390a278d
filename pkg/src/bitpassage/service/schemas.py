"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateDataRequest(BaseModel):
    out_dir: str
    n_passages: int = 20_000
    input_dims: int = 256
    clusters: int = 256
    cluster_noise: float = 0.35
    feature_noise: float = 0.05
    hard_negative_scale: float = 0.5
    train_instances: int = 512
    eval_queries: int = 400
    seed: int = 0


class GenerateDataResponse(BaseModel):
    corpus_path: str
    train_path: str
    queries_path: str
    manifest_path: str
    n_passages: int
    train_instances: int
    eval_queries: int


class TrainRequest(BaseModel):
    data_path: str
    out_path: str
    epochs: int = 40
    batch_size: int = 128
    lr: float = 2e-5
    warmup_ratio: float = 0.06
    weight_decay: float = 0.0
    gamma: float = 0.1
    alpha: float = 2.0
    cand_loss: str = "ranking"
    in_batch_negatives: bool = True
    seed: int = 0
    code_dims: int = 768
    init_scale: float = 1e-3


class TrainResponse(BaseModel):
    checkpoint_path: str
    loss_trace_path: str
    manifest_path: str
    steps: int
    final_loss: float
    final_beta: float


class BuildIndexRequest(BaseModel):
    model_path: str
    corpus_path: str
    out_path: str
    hash_bits: Optional[int] = None
    seed: int = 0


class BuildIndexResponse(BaseModel):
    index_path: str
    manifest_path: str
    count: int
    dims: int
    payload_bytes: int
    checksum: str


class LoadEngineRequest(BaseModel):
    name: str = Field(min_length=1)
    index_path: str
    model_path: Optional[str] = None
    hash_bits: Optional[int] = None


class EngineInfo(BaseModel):
    name: str
    count: int
    dims: int
    payload_bytes: int
    has_model: bool
    hash_bits: Optional[int] = None


class EngineListResponse(BaseModel):
    engines: List[EngineInfo]


class SearchRequest(BaseModel):
    queries: List[List[float]] = Field(min_length=1)
    l: int = 1000
    k: int = 100
    mode: str = "two_stage"
    algo: str = "scan"
    queries_are_embeddings: bool = False


class SearchHitModel(BaseModel):
    rank: int
    id: int
    hamming: Optional[int] = None
    score: Optional[float] = None


class SearchResponse(BaseModel):
    mode: str
    algo: str
    results: List[List[SearchHitModel]]


class ErrorResponse(BaseModel):
    detail: str
