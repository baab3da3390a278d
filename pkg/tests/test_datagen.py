import numpy as np
import pytest

from bitpassage.datagen import GenConfig, generate, validate_gen_config
from bitpassage.errors import ValidationError


def tiny_cfg(**overrides):
    base = dict(
        n_passages=300, input_dims=16, clusters=8, train_instances=40,
        eval_queries=20, seed=3,
    )
    base.update(overrides)
    return GenConfig(**base)


def test_shapes_and_split():
    data = generate(tiny_cfg())
    assert data.corpus_features.shape == (300, 16)
    assert len(data.train) == 40
    assert data.query_features.shape == (20, 16)
    assert len(data.relevant) == 20
    # relevant ids are corpus ids disjoint from training positives
    rel = {r for rel in data.relevant for r in rel}
    assert rel.isdisjoint(set(data.train_passage_ids.tolist()))
    assert all(0 <= r < 300 for r in rel)


def test_determinism_per_seed():
    a = generate(tiny_cfg())
    b = generate(tiny_cfg())
    assert np.array_equal(a.corpus_features, b.corpus_features)
    assert np.array_equal(a.query_features, b.query_features)
    c = generate(tiny_cfg(seed=4))
    assert not np.array_equal(a.corpus_features, c.corpus_features)


def test_planting_oracle_prefers_positive():
    """In latent space the planted positive outscores random passages."""
    data = generate(tiny_cfg(n_passages=500, train_instances=100))
    lat = data.latents
    rng = np.random.default_rng(0)
    wins = 0
    for i, pid in enumerate(data.train_passage_ids):
        z = lat[pid]
        rand = int(rng.integers(0, 500))
        if np.dot(z, z) > np.dot(z, lat[rand]):
            wins += 1
    assert wins >= 95  # self-similarity dominates almost surely


def test_hard_negative_is_near_but_not_equal():
    data = generate(tiny_cfg())
    for inst in data.train[:5]:
        assert not np.array_equal(inst.negatives[0], inst.positive)
    # the distractor sits closer to the positive than a random passage does
    d_hard = np.linalg.norm(data.train[0].negatives[0] - data.train[0].positive)
    d_rand = np.linalg.norm(data.corpus_features[-1] - data.train[0].positive)
    assert d_hard < d_rand


def test_validation_errors():
    with pytest.raises(ValidationError):
        validate_gen_config(tiny_cfg(n_passages=0))
    with pytest.raises(ValidationError):
        validate_gen_config(tiny_cfg(train_instances=290, eval_queries=20))
    with pytest.raises(ValidationError):
        validate_gen_config(tiny_cfg(cluster_noise=-0.1))
    with pytest.raises(ValidationError):
        validate_gen_config(tiny_cfg(clusters=0))
