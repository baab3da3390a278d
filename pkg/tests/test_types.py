import numpy as np
import pytest
from hypothesis import given, strategies as st

from bitpassage.errors import ValidationError
from bitpassage.types import (
    BinaryCode,
    DenseVector,
    PassageRecord,
    TrainingInstance,
    new_binary_code,
    pack_bit_rows,
    unpack_bit_rows,
    unpack_code,
    words_per_code,
)


def test_pack_example_lsb_first():
    code = new_binary_code([1, -1, 1, 1, -1, -1, -1, -1])
    assert code.dims == 8
    assert code.words.tolist() == [0b00001101]


def test_pack_all_negative_word():
    code = new_binary_code([-1] * 64)
    assert code.dims == 64
    assert code.words.tolist() == [0x0]


def test_pack_padding_rule():
    code = new_binary_code([1] * 65)
    assert code.dims == 65
    assert code.words.tolist() == [0xFFFF_FFFF_FFFF_FFFF, 0x1]


def test_rejects_non_sign_values():
    with pytest.raises(ValidationError):
        new_binary_code([1, 0, -1])
    with pytest.raises(ValidationError):
        new_binary_code([])


def test_padding_bits_must_be_zero():
    with pytest.raises(ValidationError):
        BinaryCode(dims=8, words=np.array([0x1FF], dtype=np.uint64))


def test_word_count_must_match_dims():
    with pytest.raises(ValidationError):
        BinaryCode(dims=65, words=np.array([0x0], dtype=np.uint64))


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=300))
def test_roundtrip_and_canonical_equality(bits):
    code = new_binary_code(bits)
    assert unpack_code(code).tolist() == bits
    assert new_binary_code(bits) == code
    assert hash(new_binary_code(bits)) == hash(code)


def test_roundtrip_matrix_helpers(rng):
    bits = rng.integers(0, 2, size=(17, 130), dtype=np.uint8)
    words = pack_bit_rows(bits)
    assert words.shape == (17, words_per_code(130))
    assert np.array_equal(unpack_bit_rows(words, 130), bits)


def test_dense_vector_requires_finite():
    with pytest.raises(ValidationError):
        DenseVector(np.array([1.0, np.nan]))
    with pytest.raises(ValidationError):
        DenseVector(np.array([np.inf]))
    v = DenseVector(np.array([1.5, -2.0]))
    assert v.dims == 2


def test_passage_record_id_nonnegative():
    with pytest.raises(ValidationError):
        PassageRecord(id=-1)
    assert PassageRecord(id=3, payload=b"x").payload == b"x"


def test_training_instance_dim_consistency():
    with pytest.raises(ValidationError):
        TrainingInstance(
            question=np.ones(4), positive=np.ones(4), negatives=(np.ones(3),)
        )
    inst = TrainingInstance(
        question=np.ones(4), positive=np.zeros(4), negatives=(np.ones(4),)
    )
    assert inst.input_dims == 4
