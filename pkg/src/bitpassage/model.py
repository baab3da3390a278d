"""Two-tower linear encoders feeding the hash layer, plus checkpoint I/O.

Each tower is a single linear map (a desk-scale stand-in for a deep encoder);
the towers share no parameters. Checkpoints reuse the binary envelope of the
index format with float64 row-major payloads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hashing import sign_hash_matrix
from .serialization import read_envelope, write_envelope
from .types import BinaryCode, DenseVector, as_float_vector

MODEL_MAGIC = b"BPRMDL01"
MODEL_VERSION = 1


@dataclass
class TwoTowerModel:
    w_q: np.ndarray  # (code_dims, input_dims)
    b_q: np.ndarray  # (code_dims,)
    w_p: np.ndarray
    b_p: np.ndarray

    def __post_init__(self):
        for name in ("w_q", "b_q", "w_p", "b_p"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        if self.w_q.shape != self.w_p.shape or self.w_q.ndim != 2:
            raise ValidationError("towers must be two matrices of identical shape")
        if self.b_q.shape != (self.code_dims,) or self.b_p.shape != (self.code_dims,):
            raise ValidationError("bias shape must match code_dims")

    @property
    def input_dims(self) -> int:
        return int(self.w_q.shape[1])

    @property
    def code_dims(self) -> int:
        return int(self.w_q.shape[0])

    def params(self):
        return [self.w_q, self.b_q, self.w_p, self.b_p]


def init_model(input_dims: int, code_dims: int, seed: int, init_scale: float = 1e-3) -> TwoTowerModel:
    """Random init, deliberately small so early optimizer steps set the code
    geometry rather than fighting the initialization."""
    rng = np.random.default_rng(seed)
    scale = init_scale / np.sqrt(input_dims)
    return TwoTowerModel(
        w_q=scale * rng.standard_normal((code_dims, input_dims)),
        b_q=np.zeros(code_dims),
        w_p=scale * rng.standard_normal((code_dims, input_dims)),
        b_p=np.zeros(code_dims),
    )


def _check_inputs(model: TwoTowerModel, x: np.ndarray):
    if x.shape[-1] != model.input_dims:
        raise ValidationError(f"input dims {x.shape[-1]} != model input dims {model.input_dims}")


def encode_questions(model: TwoTowerModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_inputs(model, x)
    return x @ model.w_q.T + model.b_q


def encode_passages(model: TwoTowerModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_inputs(model, x)
    return x @ model.w_p.T + model.b_p


def _encode_single(e: np.ndarray, beta: float):
    relaxed = DenseVector(np.tanh(beta * e))
    words = sign_hash_matrix(e[None, :])[0]
    return DenseVector(e), relaxed, BinaryCode(dims=e.size, words=words)


def encode_question(model: TwoTowerModel, x, beta: float):
    """One question -> (float embedding, tanh relaxation, binary code)."""
    e = encode_questions(model, as_float_vector(x)[None, :])[0]
    return _encode_single(e, beta)


def encode_passage(model: TwoTowerModel, x, beta: float):
    """One passage -> (float embedding, tanh relaxation, binary code)."""
    e = encode_passages(model, as_float_vector(x)[None, :])[0]
    return _encode_single(e, beta)


def save_model(model: TwoTowerModel, path):
    payload = b"".join(
        np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params()
    )
    write_envelope(path, MODEL_MAGIC, MODEL_VERSION, model.code_dims, model.input_dims, payload)


def load_model(path) -> TwoTowerModel:
    def payload_size(code_dims, input_dims):
        return 2 * (code_dims * input_dims + code_dims) * 8

    code_dims, input_dims, payload = read_envelope(path, MODEL_MAGIC, MODEL_VERSION, payload_size)
    code_dims, input_dims = int(code_dims), int(input_dims)
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)
    w_size = code_dims * input_dims
    offsets = np.cumsum([0, w_size, code_dims, w_size, code_dims])
    w_q, b_q, w_p, b_p = (
        flat[offsets[i]:offsets[i + 1]] for i in range(4)
    )
    return TwoTowerModel(
        w_q=w_q.reshape(code_dims, input_dims),
        b_q=b_q,
        w_p=w_p.reshape(code_dims, input_dims),
        b_p=b_p,
    )
