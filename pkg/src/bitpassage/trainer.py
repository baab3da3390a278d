"""Training loop: Adam with linear warmup/decay, annealed tanh sharpness,
and per-step trace recording."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ConfigError, TrainingDivergedError, ValidationError
from .losses import CAND_LOSS_KINDS, RANKING, Batch, gradients, make_batch
from .model import TwoTowerModel, init_model
from .seeding import derive_seed
from .types import TrainingInstance


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer defaults mirror the reference recipe; code_dims and
    init_scale are artifact knobs on top of it."""

    batch_size: int = 128
    epochs: int = 40
    lr: float = 2e-5
    lr_decay: str = "linear"
    warmup_ratio: float = 0.06
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-6
    weight_decay: float = 0.0
    gamma: float = 0.1
    alpha: float = 2.0
    cand_loss: str = RANKING
    in_batch_negatives: bool = True
    seed: int = 0
    code_dims: int = 768
    init_scale: float = 1e-3


def validate_train_config(cfg: TrainConfig) -> TrainConfig:
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {cfg.batch_size}")
    if cfg.epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {cfg.epochs}")
    if cfg.lr < 0:
        raise ConfigError(f"lr must be >= 0, got {cfg.lr}")
    if cfg.lr_decay != "linear":
        raise ConfigError(f"lr_decay must be 'linear', got {cfg.lr_decay!r}")
    if not (0 <= cfg.warmup_ratio < 1):
        raise ConfigError(f"warmup_ratio must be in [0, 1), got {cfg.warmup_ratio}")
    if not (cfg.gamma > 0):
        raise ConfigError(f"gamma must be > 0, got {cfg.gamma}")
    if cfg.alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {cfg.alpha}")
    if cfg.cand_loss not in CAND_LOSS_KINDS:
        raise ConfigError(f"cand_loss must be one of {CAND_LOSS_KINDS}, got {cfg.cand_loss!r}")
    if cfg.code_dims < 1:
        raise ConfigError(f"code_dims must be >= 1, got {cfg.code_dims}")
    if not (cfg.init_scale > 0):
        raise ConfigError(f"init_scale must be > 0, got {cfg.init_scale}")
    return cfg


@dataclass
class TrainResult:
    model: TwoTowerModel
    epoch_losses: List[float]
    beta_trace: List[float]
    lr_trace: List[float]
    steps: int

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else math.nan


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup over warmup_ratio of the run, then linear decay to zero.

    The first step already trains (warmup is evaluated at step + 1).
    """
    warmup = cfg.warmup_ratio * total_steps
    if warmup > 0 and step < warmup:
        return cfg.lr * (step + 1) / warmup
    if total_steps <= warmup:
        return cfg.lr
    return cfg.lr * max(0.0, (total_steps - step) / (total_steps - warmup))


def beta_for_step(step: int, gamma: float) -> float:
    """Sharpness after `step` finished optimizer steps."""
    return math.sqrt(gamma * step + 1.0)


class _Adam:
    def __init__(self, params: Sequence[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        cfg = self.cfg
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            self.m[i] = cfg.adam_beta1 * self.m[i] + (1 - cfg.adam_beta1) * g
            self.v[i] = cfg.adam_beta2 * self.v[i] + (1 - cfg.adam_beta2) * g * g
            m_hat = self.m[i] / (1 - cfg.adam_beta1 ** self.t)
            v_hat = self.v[i] / (1 - cfg.adam_beta2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def train(dataset: Sequence[TrainingInstance], cfg: TrainConfig) -> TrainResult:
    """Train a fresh two-tower model on the dataset.

    One optimizer step per mini-batch; the tanh sharpness for step t is
    beta_for_step(t) and advances after the update. Raises
    TrainingDivergedError on a non-finite loss.
    """
    validate_train_config(cfg)
    if len(dataset) == 0:
        raise ValidationError("dataset must be non-empty")
    input_dims = dataset[0].input_dims
    if any(inst.input_dims != input_dims for inst in dataset):
        raise ValidationError("all training instances must share one input dimensionality")

    full = make_batch(dataset)
    model = init_model(input_dims, cfg.code_dims, derive_seed(cfg.seed, "model-init"), cfg.init_scale)
    adam = _Adam(model.params(), cfg)
    rng = np.random.default_rng(derive_seed(cfg.seed, "batch-shuffle"))

    m = len(dataset)
    steps_per_epoch = math.ceil(m / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch

    epoch_losses: List[float] = []
    beta_trace: List[float] = []
    lr_trace: List[float] = []
    step = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(m)
        batch_losses = []
        for s in range(steps_per_epoch):
            idx = perm[s * cfg.batch_size:(s + 1) * cfg.batch_size]
            batch = Batch(
                questions=full.questions[idx],
                positives=full.positives[idx],
                hard_negatives=full.hard_negatives[idx],
            )
            beta = beta_for_step(step, cfg.gamma)
            loss, grads = gradients(
                model, batch, beta,
                alpha=cfg.alpha, cand_loss=cfg.cand_loss,
                in_batch_negatives=cfg.in_batch_negatives,
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss} at step {step}")
            lr = lr_at(step, total_steps, cfg)
            adam.step(model.params(), grads.as_list(), lr)
            beta_trace.append(beta)
            lr_trace.append(lr)
            batch_losses.append(loss)
            step += 1
        epoch_losses.append(float(np.mean(batch_losses)))
    return TrainResult(
        model=model,
        epoch_losses=epoch_losses,
        beta_trace=beta_trace,
        lr_trace=lr_trace,
        steps=step,
    )
