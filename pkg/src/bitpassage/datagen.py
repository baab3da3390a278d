"""Synthetic clustered retrieval task with planted positives.

Passages live on latent cluster positions; questions observe the same latent
through a different fixed orthogonal view, so an untrained model retrieves at
chance level and any real recall has to be learned. Each training question
gets one planted near-positive distractor as its hard negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import ValidationError
from .seeding import rng_for
from .types import TrainingInstance


@dataclass(frozen=True)
class GenConfig:
    n_passages: int = 20_000
    input_dims: int = 256
    clusters: int = 256
    cluster_noise: float = 0.35
    feature_noise: float = 0.05
    hard_negative_scale: float = 0.5
    train_instances: int = 512
    eval_queries: int = 400
    seed: int = 0


def validate_gen_config(cfg: GenConfig) -> GenConfig:
    if cfg.n_passages < 1:
        raise ValidationError(f"n_passages must be >= 1, got {cfg.n_passages}")
    if cfg.input_dims < 1:
        raise ValidationError(f"input_dims must be >= 1, got {cfg.input_dims}")
    if cfg.clusters < 1:
        raise ValidationError(f"clusters must be >= 1, got {cfg.clusters}")
    for name in ("cluster_noise", "feature_noise", "hard_negative_scale"):
        if getattr(cfg, name) < 0:
            raise ValidationError(f"{name} must be >= 0")
    if cfg.train_instances < 1:
        raise ValidationError(f"train_instances must be >= 1, got {cfg.train_instances}")
    if cfg.eval_queries < 0:
        raise ValidationError(f"eval_queries must be >= 0, got {cfg.eval_queries}")
    if cfg.train_instances + cfg.eval_queries > cfg.n_passages:
        raise ValidationError(
            "train_instances + eval_queries cannot exceed n_passages "
            f"({cfg.train_instances} + {cfg.eval_queries} > {cfg.n_passages})"
        )
    return cfg


@dataclass
class SyntheticDataset:
    corpus_features: np.ndarray          # (N, input_dims)
    corpus_payloads: List[str]           # cluster tag per passage
    train: List[TrainingInstance]
    train_passage_ids: np.ndarray        # corpus id of each training positive
    query_ids: np.ndarray                # eval question ids (0..Q-1)
    query_features: np.ndarray           # (Q, input_dims)
    relevant: List[List[int]]            # corpus ids answering each question
    latents: np.ndarray                  # (N, input_dims), for self-checks


def _orthogonal(rng: np.random.Generator, dims: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dims, dims)))
    return q


def generate(cfg: GenConfig) -> SyntheticDataset:
    validate_gen_config(cfg)
    seed = cfg.seed
    d = cfg.input_dims

    centers = rng_for(seed, "centers").standard_normal((cfg.clusters, d))
    assign = rng_for(seed, "assign").integers(0, cfg.clusters, size=cfg.n_passages)
    latents = centers[assign] + cfg.cluster_noise * rng_for(seed, "latents").standard_normal(
        (cfg.n_passages, d)
    )
    view_q = _orthogonal(rng_for(seed, "view-q"), d)
    view_p = _orthogonal(rng_for(seed, "view-p"), d)

    noise = rng_for(seed, "corpus-noise")
    corpus = latents @ view_p + cfg.feature_noise * noise.standard_normal((cfg.n_passages, d))

    split = rng_for(seed, "split").permutation(cfg.n_passages)
    train_ids = np.sort(split[: cfg.train_instances])
    eval_ids = np.sort(split[cfg.train_instances:cfg.train_instances + cfg.eval_queries])

    def questions_for(ids, label):
        r = rng_for(seed, label)
        return latents[ids] @ view_q + cfg.feature_noise * r.standard_normal((len(ids), d))

    q_train = questions_for(train_ids, "train-questions")
    q_eval = questions_for(eval_ids, "eval-questions")

    hn = rng_for(seed, "hard-negatives")
    distractor_latents = latents[train_ids] + (
        cfg.hard_negative_scale * cfg.cluster_noise
    ) * hn.standard_normal((len(train_ids), d))
    hard_negatives = distractor_latents @ view_p + cfg.feature_noise * hn.standard_normal(
        (len(train_ids), d)
    )

    train = [
        TrainingInstance(
            question=q_train[i],
            positive=corpus[train_ids[i]],
            negatives=(hard_negatives[i],),
        )
        for i in range(len(train_ids))
    ]
    payloads = [f"cluster={int(c)}" for c in assign]
    return SyntheticDataset(
        corpus_features=corpus,
        corpus_payloads=payloads,
        train=train,
        train_passage_ids=train_ids,
        query_ids=np.arange(len(eval_ids)),
        query_features=q_eval,
        relevant=[[int(p)] for p in eval_ids],
        latents=latents,
    )
