"""Training losses and their analytic gradients.

The objective sums two tasks per question: a candidate-generation loss over
relaxed code scores <th_q, th_p> (margin ranking by default, softmax NLL as a
variant) and a reranking softmax NLL over asymmetric scores <e_q, th_p>.
With in-batch negatives each question sees every other question's positive
plus its own hard negative; without, only the hard negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ValidationError
from .model import TwoTowerModel, encode_passages, encode_questions
from .types import TrainingInstance

RANKING = "ranking"
CROSS_ENTROPY = "cross_entropy"
CAND_LOSS_KINDS = (RANKING, CROSS_ENTROPY)


def softmax_nll(s_pos: float, s_negs: Sequence[float]) -> float:
    """-log softmax of the positive score against positive + negatives."""
    negs = np.asarray(s_negs, dtype=np.float64)
    if negs.size < 1:
        raise ValidationError("softmax NLL needs at least one negative score")
    logits = np.concatenate(([s_pos], negs))
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()) - s_pos)


def margin_ranking_loss(s_pos: float, s_negs: Sequence[float], margin: float) -> float:
    """Sum of per-negative hinges max(0, margin - (s_pos - s_neg))."""
    if margin < 0:
        raise ValidationError(f"margin must be >= 0, got {margin}")
    negs = np.asarray(s_negs, dtype=np.float64)
    return float(np.maximum(0.0, margin - (s_pos - negs)).sum())


# Spec'd loss surface: the float-score NLL reference, the two candidate-task
# variants over relaxed code scores, and the reranking NLL over asymmetric
# scores all share the two primitives above.
loss_dpr = softmax_nll
loss_cand_ranking = margin_ranking_loss
loss_cand_cross_entropy = softmax_nll
loss_rerank = softmax_nll


@dataclass
class Batch:
    """Dense feature rows for one mini-batch: question, positive, hard negative."""

    questions: np.ndarray  # (B, input_dims)
    positives: np.ndarray
    hard_negatives: np.ndarray

    @property
    def size(self) -> int:
        return int(self.questions.shape[0])


def make_batch(instances: Sequence[TrainingInstance]) -> Batch:
    """Stack instances, taking the first negative as the hard negative."""
    if len(instances) == 0:
        raise ValidationError("batch must contain at least one question")
    if any(len(inst.negatives) < 1 for inst in instances):
        raise ValidationError("every instance needs at least one hard negative")
    return Batch(
        questions=np.stack([inst.question for inst in instances]),
        positives=np.stack([inst.positive for inst in instances]),
        hard_negatives=np.stack([inst.negatives[0] for inst in instances]),
    )


@dataclass
class BatchScores:
    """Score matrices for one batch; row i is question i, column j passage j's
    positive, and *_hard holds the question's own hard negative."""

    cand: np.ndarray        # (B, B) <th_q, th_p>
    cand_hard: np.ndarray   # (B,)
    rerank: np.ndarray      # (B, B) <e_q, th_p>
    rerank_hard: np.ndarray  # (B,)


@dataclass
class _Forward:
    e_q: np.ndarray
    e_pos: np.ndarray
    e_neg: np.ndarray
    th_q: np.ndarray
    th_pos: np.ndarray
    th_neg: np.ndarray
    scores: BatchScores


def _forward(model: TwoTowerModel, batch: Batch, beta: float) -> _Forward:
    e_q = encode_questions(model, batch.questions)
    e_pos = encode_passages(model, batch.positives)
    e_neg = encode_passages(model, batch.hard_negatives)
    th_q = np.tanh(beta * e_q)
    th_pos = np.tanh(beta * e_pos)
    th_neg = np.tanh(beta * e_neg)
    scores = BatchScores(
        cand=th_q @ th_pos.T,
        cand_hard=np.einsum("ij,ij->i", th_q, th_neg),
        rerank=e_q @ th_pos.T,
        rerank_hard=np.einsum("ij,ij->i", e_q, th_neg),
    )
    return _Forward(e_q, e_pos, e_neg, th_q, th_pos, th_neg, scores)


def batch_scores(model: TwoTowerModel, batch: Batch, beta: float) -> BatchScores:
    return _forward(model, batch, beta).scores


def _nll_terms(matrix, hard, in_batch):
    """Per-question NLL and dLoss/dScore (matrix part, hard part), unscaled."""
    b = matrix.shape[0]
    diag = np.arange(b)
    if in_batch:
        logits = np.concatenate([matrix, hard[:, None]], axis=1)
    else:
        logits = np.stack([matrix[diag, diag], hard], axis=1)
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    losses = lse - matrix[diag, diag]
    probs = np.exp(logits - lse[:, None])
    g_matrix = np.zeros_like(matrix)
    if in_batch:
        g_matrix[:] = probs[:, :b]
        g_hard = probs[:, b].copy()
    else:
        g_matrix[diag, diag] = probs[:, 0]
        g_hard = probs[:, 1].copy()
    g_matrix[diag, diag] -= 1.0
    return losses, g_matrix, g_hard


def _ranking_terms(matrix, hard, margin, in_batch):
    """Per-question hinge sums and dLoss/dScore, unscaled."""
    b = matrix.shape[0]
    diag = np.arange(b)
    pos = matrix[diag, diag]
    g_matrix = np.zeros_like(matrix)
    act_hard = (margin - (pos - hard)) > 0
    losses = np.where(act_hard, margin - (pos - hard), 0.0)
    g_hard = act_hard.astype(np.float64)
    n_active = g_hard.copy()
    if in_batch:
        slack = margin - (pos[:, None] - matrix)
        act = slack > 0
        act[diag, diag] = False
        losses = losses + np.where(act, slack, 0.0).sum(axis=1)
        g_matrix[:] = act.astype(np.float64)
        n_active += act.sum(axis=1)
    g_matrix[diag, diag] = -n_active
    return losses, g_matrix, g_hard


def per_question_losses(
    model: TwoTowerModel,
    batch: Batch,
    beta: float,
    alpha: float = 2.0,
    cand_loss: str = RANKING,
    in_batch_negatives: bool = True,
):
    """(candidate-task losses, reranking losses), one entry per question."""
    if cand_loss not in CAND_LOSS_KINDS:
        raise ValidationError(f"unknown cand_loss {cand_loss!r}")
    fwd = _forward(model, batch, beta)
    s = fwd.scores
    if cand_loss == RANKING:
        cand, _, _ = _ranking_terms(s.cand, s.cand_hard, alpha, in_batch_negatives)
    else:
        cand, _, _ = _nll_terms(s.cand, s.cand_hard, in_batch_negatives)
    rerank, _, _ = _nll_terms(s.rerank, s.rerank_hard, in_batch_negatives)
    return cand, rerank


def loss_total(
    model: TwoTowerModel,
    batch: Batch,
    beta: float,
    alpha: float = 2.0,
    cand_loss: str = RANKING,
    in_batch_negatives: bool = True,
) -> float:
    """Mean over questions of candidate-task plus reranking loss."""
    cand, rerank = per_question_losses(
        model, batch, beta, alpha=alpha, cand_loss=cand_loss,
        in_batch_negatives=in_batch_negatives,
    )
    return float(np.mean(cand + rerank))


@dataclass
class Gradients:
    w_q: np.ndarray
    b_q: np.ndarray
    w_p: np.ndarray
    b_p: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        return [self.w_q, self.b_q, self.w_p, self.b_p]


def gradients(
    model: TwoTowerModel,
    batch: Batch,
    beta: float,
    alpha: float = 2.0,
    cand_loss: str = RANKING,
    in_batch_negatives: bool = True,
    terms: str = "both",
):
    """(loss, analytic parameter gradients) for one batch.

    terms selects the objective: 'both' (the training loss), or 'cand' /
    'rerank' alone, which is what independent gradient checks exercise.
    """
    if cand_loss not in CAND_LOSS_KINDS:
        raise ValidationError(f"unknown cand_loss {cand_loss!r}")
    if terms not in ("both", "cand", "rerank"):
        raise ValidationError(f"terms must be 'both', 'cand' or 'rerank', got {terms!r}")
    fwd = _forward(model, batch, beta)
    s = fwd.scores
    b = batch.size

    if cand_loss == RANKING:
        cand, gc, gc_hard = _ranking_terms(s.cand, s.cand_hard, alpha, in_batch_negatives)
    else:
        cand, gc, gc_hard = _nll_terms(s.cand, s.cand_hard, in_batch_negatives)
    rerank, gr, gr_hard = _nll_terms(s.rerank, s.rerank_hard, in_batch_negatives)
    if terms == "cand":
        rerank = np.zeros_like(rerank)
        gr = np.zeros_like(gr)
        gr_hard = np.zeros_like(gr_hard)
    elif terms == "rerank":
        cand = np.zeros_like(cand)
        gc = np.zeros_like(gc)
        gc_hard = np.zeros_like(gc_hard)
    total = float(np.mean(cand + rerank))

    gc = gc / b
    gc_hard = gc_hard / b
    gr = gr / b
    gr_hard = gr_hard / b

    d_th_q = gc @ fwd.th_pos + gc_hard[:, None] * fwd.th_neg
    d_th_pos = gc.T @ fwd.th_q + gr.T @ fwd.e_q
    d_th_neg = gc_hard[:, None] * fwd.th_q + gr_hard[:, None] * fwd.e_q

    # rerank scores touch e_q both directly and through the relaxed code
    d_e_q = (
        gr @ fwd.th_pos
        + gr_hard[:, None] * fwd.th_neg
        + d_th_q * beta * (1.0 - fwd.th_q**2)
    )
    d_e_pos = d_th_pos * beta * (1.0 - fwd.th_pos**2)
    d_e_neg = d_th_neg * beta * (1.0 - fwd.th_neg**2)

    grads = Gradients(
        w_q=d_e_q.T @ batch.questions,
        b_q=d_e_q.sum(axis=0),
        w_p=d_e_pos.T @ batch.positives + d_e_neg.T @ batch.hard_negatives,
        b_p=d_e_pos.sum(axis=0) + d_e_neg.sum(axis=0),
    )
    return total, grads
