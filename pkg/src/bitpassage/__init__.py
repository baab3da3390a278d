"""bitpassage: two-stage passage retrieval over learned binary codes.

Candidate generation ranks packed codes by Hamming distance (popcount linear
scan or prefix hash-table lookup); reranking scores the candidates with the
float query embedding against each binary code. Includes a desk-scale
two-tower hash trainer, baselines, an evaluation harness, a CLI and a FastAPI
service.
"""

__version__ = "0.1.0"

from .config import EngineConfig, validate_config
from .errors import (
    ChecksumError,
    ConfigError,
    DataError,
    EngineError,
    FormatError,
    MagicMismatchError,
    TruncatedFileError,
    ValidationError,
    VersionMismatchError,
)
from .hashing import (
    BetaSchedule,
    asymmetric_inner_product,
    beta_at,
    binary_inner_product,
    hamming_distance,
    scaled_tanh,
    sign_hash,
)
from .index import (
    CorpusIndex,
    HashTable,
    build_hash_table,
    build_index,
    hash_lookup,
    linear_scan,
    load_index,
    save_index,
)
from .retriever import RetrievalMode, RetrievalRequest, derive_query_code, retrieve
from .types import (
    BinaryCode,
    DenseVector,
    PassageRecord,
    SearchResult,
    TrainingInstance,
    new_binary_code,
    unpack_code,
)

__all__ = [
    "__version__",
    "BetaSchedule",
    "BinaryCode",
    "ChecksumError",
    "ConfigError",
    "CorpusIndex",
    "DataError",
    "DenseVector",
    "EngineConfig",
    "EngineError",
    "FormatError",
    "HashTable",
    "MagicMismatchError",
    "PassageRecord",
    "RetrievalMode",
    "RetrievalRequest",
    "SearchResult",
    "TrainingInstance",
    "TruncatedFileError",
    "ValidationError",
    "VersionMismatchError",
    "asymmetric_inner_product",
    "beta_at",
    "binary_inner_product",
    "build_hash_table",
    "build_index",
    "derive_query_code",
    "hamming_distance",
    "hash_lookup",
    "linear_scan",
    "load_index",
    "new_binary_code",
    "retrieve",
    "save_index",
    "scaled_tanh",
    "sign_hash",
    "unpack_code",
    "validate_config",
]
