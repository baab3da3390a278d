"""Engine configuration and validation."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

# Prefix keys longer than this make radius enumeration of the lookup table
# explode combinatorially, so the bound is enforced at config time.
MAX_HASH_BITS = 30


@dataclass(frozen=True)
class EngineConfig:
    """Retrieval-engine knobs; defaults follow the reference setup."""

    dims: int = 768
    candidates: int = 1000
    top_k: int = 100
    gamma: float = 0.1
    alpha: float = 2.0
    hash_bits: int = 20
    seed: int = 0


def validate_config(cfg: EngineConfig) -> EngineConfig:
    """Return cfg unchanged iff every invariant holds; raise ConfigError naming the field."""
    if cfg.dims < 1:
        raise ConfigError(f"dims must be >= 1, got {cfg.dims}")
    if cfg.candidates < 1:
        raise ConfigError(f"candidates must be >= 1, got {cfg.candidates}")
    if cfg.top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {cfg.top_k}")
    if cfg.top_k > cfg.candidates:
        raise ConfigError(f"top_k exceeds candidates: k={cfg.top_k} > l={cfg.candidates}")
    if not (cfg.gamma > 0):
        raise ConfigError(f"gamma must be > 0, got {cfg.gamma}")
    if cfg.alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {cfg.alpha}")
    bound = min(cfg.dims, MAX_HASH_BITS)
    if not (1 <= cfg.hash_bits <= bound):
        raise ConfigError(
            f"hash_bits out of range: {cfg.hash_bits} not in [1, {bound}]"
        )
    return cfg
