import pytest

from bitpassage.config import EngineConfig, validate_config
from bitpassage.errors import ConfigError


def test_defaults_are_valid():
    cfg = validate_config(EngineConfig())
    assert (cfg.dims, cfg.candidates, cfg.top_k) == (768, 1000, 100)
    assert (cfg.gamma, cfg.alpha, cfg.hash_bits) == (0.1, 2.0, 20)


def test_k_exceeding_l_names_the_fields():
    with pytest.raises(ConfigError, match="top_k exceeds candidates"):
        validate_config(EngineConfig(top_k=2000, candidates=1000))


def test_hash_bits_out_of_range():
    with pytest.raises(ConfigError, match="hash_bits out of range"):
        validate_config(EngineConfig(hash_bits=64))
    with pytest.raises(ConfigError, match="hash_bits"):
        validate_config(EngineConfig(hash_bits=0))
    # bounded by dims when dims < 30
    with pytest.raises(ConfigError, match="hash_bits"):
        validate_config(EngineConfig(dims=16, hash_bits=20))


@pytest.mark.parametrize(
    "kwargs,needle",
    [
        (dict(dims=0), "dims"),
        (dict(candidates=0), "candidates"),
        (dict(top_k=0), "top_k"),
        (dict(gamma=0.0), "gamma"),
        (dict(alpha=-1.0), "alpha"),
    ],
)
def test_each_violation_names_its_field(kwargs, needle):
    with pytest.raises(ConfigError, match=needle):
        validate_config(EngineConfig(**kwargs))
