import math

import numpy as np
import pytest

import bitpassage.trainer as trainer_mod
from bitpassage.errors import ConfigError, TrainingDivergedError, ValidationError
from bitpassage.losses import Gradients
from bitpassage.model import init_model, load_model, save_model
from bitpassage.seeding import derive_seed
from bitpassage.trainer import TrainConfig, beta_for_step, lr_at, train, validate_train_config
from bitpassage.types import TrainingInstance


def toy_dataset(rng, m=12, dims=6):
    out = []
    for _ in range(m):
        out.append(TrainingInstance(
            question=rng.standard_normal(dims),
            positive=rng.standard_normal(dims),
            negatives=(rng.standard_normal(dims),),
        ))
    return out


def small_cfg(**overrides):
    base = dict(batch_size=4, epochs=2, code_dims=8, seed=7)
    base.update(overrides)
    return TrainConfig(**base)


def test_defaults_mirror_reference_recipe():
    cfg = TrainConfig()
    assert cfg.batch_size == 128
    assert cfg.epochs == 40
    assert cfg.lr == 2e-5
    assert cfg.lr_decay == "linear"
    assert cfg.warmup_ratio == 0.06
    assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (0.9, 0.999, 1e-6)
    assert cfg.weight_decay == 0.0
    assert (cfg.gamma, cfg.alpha) == (0.1, 2.0)
    assert cfg.cand_loss == "ranking"
    assert cfg.in_batch_negatives is True


def test_zero_lr_keeps_parameters(rng):
    dataset = toy_dataset(rng)
    cfg = small_cfg(lr=0.0)
    result = train(dataset, cfg)
    init = init_model(6, 8, derive_seed(cfg.seed, "model-init"), cfg.init_scale)
    for got, want in zip(result.model.params(), init.params()):
        assert np.array_equal(got, want)


def test_zero_epochs_returns_initialization(rng):
    dataset = toy_dataset(rng)
    cfg = small_cfg(epochs=0)
    result = train(dataset, cfg)
    init = init_model(6, 8, derive_seed(cfg.seed, "model-init"), cfg.init_scale)
    assert result.steps == 0 and result.epoch_losses == []
    for got, want in zip(result.model.params(), init.params()):
        assert np.array_equal(got, want)


def test_beta_trace_follows_schedule(rng):
    # 13 instances, batch 1 -> 13 steps/epoch; 77 epochs -> 1001 steps >= 991
    dataset = toy_dataset(rng, m=13, dims=4)
    cfg = small_cfg(batch_size=1, epochs=77, code_dims=4, gamma=0.1)
    result = train(dataset, cfg)
    assert result.steps == 1001
    assert result.beta_trace[0] == 1.0
    assert abs(result.beta_trace[990] - 10.0) < 1e-12
    for t, beta in enumerate(result.beta_trace):
        assert abs(beta - math.sqrt(0.1 * t + 1.0)) < 1e-12


def test_training_is_deterministic(rng):
    dataset = toy_dataset(rng, m=20)
    a = train(dataset, small_cfg(epochs=3))
    b = train(dataset, small_cfg(epochs=3))
    for pa, pb in zip(a.model.params(), b.model.params()):
        assert np.array_equal(pa, pb)
    assert a.epoch_losses == b.epoch_losses
    c = train(dataset, small_cfg(epochs=3, seed=8))
    assert any(
        not np.array_equal(pa, pc) for pa, pc in zip(a.model.params(), c.model.params())
    )


def test_lr_schedule_shape():
    cfg = TrainConfig(lr=1.0, warmup_ratio=0.1)
    total = 100
    values = [lr_at(t, total, cfg) for t in range(total)]
    peak = max(values)
    assert peak == pytest.approx(1.0)
    assert values.index(peak) == 9  # end of warmup (10 warmup steps)
    assert values[-1] == pytest.approx(1.0 / 90, rel=1e-12)
    assert all(v > 0 for v in values)
    # monotone up then monotone down
    up = values[:10]
    down = values[9:]
    assert up == sorted(up)
    assert down == sorted(down, reverse=True)


def test_beta_for_step_formula():
    assert beta_for_step(0, 0.1) == 1.0
    assert beta_for_step(990, 0.1) == pytest.approx(10.0, abs=1e-12)


def test_divergence_aborts_with_step(rng, monkeypatch):
    dataset = toy_dataset(rng)

    def bad_gradients(model, batch, beta, **kwargs):
        zeros = Gradients(*[np.zeros_like(p) for p in model.params()])
        return float("nan"), zeros

    monkeypatch.setattr(trainer_mod, "gradients", bad_gradients)
    with pytest.raises(TrainingDivergedError, match="step 0"):
        train(dataset, small_cfg())


def test_validations(rng):
    with pytest.raises(ValidationError):
        train([], small_cfg())
    mixed = [
        TrainingInstance(question=np.ones(4), positive=np.ones(4), negatives=(np.ones(4),)),
        TrainingInstance(question=np.ones(5), positive=np.ones(5), negatives=(np.ones(5),)),
    ]
    with pytest.raises(ValidationError):
        train(mixed, small_cfg())
    with pytest.raises(ConfigError):
        validate_train_config(TrainConfig(batch_size=0))
    with pytest.raises(ConfigError):
        validate_train_config(TrainConfig(cand_loss="huber"))
    with pytest.raises(ConfigError):
        validate_train_config(TrainConfig(lr_decay="cosine"))
    with pytest.raises(ConfigError):
        validate_train_config(TrainConfig(warmup_ratio=1.0))


def test_weight_decay_changes_trajectory(rng):
    dataset = toy_dataset(rng)
    a = train(dataset, small_cfg(lr=1e-3))
    b = train(dataset, small_cfg(lr=1e-3, weight_decay=0.1))
    assert any(not np.array_equal(pa, pb) for pa, pb in zip(a.model.params(), b.model.params()))


def test_checkpoint_roundtrip(tmp_path, rng):
    dataset = toy_dataset(rng)
    result = train(dataset, small_cfg(lr=1e-3))
    path = tmp_path / "model.ckpt"
    save_model(result.model, path)
    loaded = load_model(path)
    assert loaded.input_dims == 6 and loaded.code_dims == 8
    for got, want in zip(loaded.params(), result.model.params()):
        assert np.array_equal(got, want)


def test_training_beats_untrained_on_separable_task():
    """Held-out binary top-1 recall improves over the random initialization."""
    from bitpassage.datagen import GenConfig, generate
    from bitpassage.evaluation import run_eval
    from bitpassage.hashing import sign_hash_matrix
    from bitpassage.index import index_from_packed
    from bitpassage.model import encode_passages, encode_questions
    from bitpassage.retriever import RetrievalMode

    gen = GenConfig(
        n_passages=2000, input_dims=32, clusters=50, train_instances=512,
        eval_queries=150, seed=21,
    )
    data = generate(gen)
    cfg = TrainConfig(epochs=5, batch_size=128, code_dims=64, seed=21)

    def top1_binary_recall(model):
        e_p = encode_passages(model, data.corpus_features)
        index = index_from_packed(model.code_dims, sign_hash_matrix(e_p))
        e_q = encode_questions(model, data.query_features)
        report = run_eval(
            index, None, e_q, data.relevant, l=100, ks=(1,),
            mode=RetrievalMode.NO_RERANK, timed=False,
        )
        return report.recall[1]

    untrained = init_model(32, 64, derive_seed(cfg.seed, "model-init"), cfg.init_scale)
    trained = train(data.train, cfg).model
    assert top1_binary_recall(trained) > top1_binary_recall(untrained)
