import numpy as np
import pytest

from bitpassage.index import index_from_packed
from bitpassage.types import pack_bit_rows


@pytest.fixture
def rng():
    return np.random.default_rng(0xBEEF)


def random_words(rng, n, dims):
    """Random packed codes with canonical (zeroed) padding."""
    bits = rng.integers(0, 2, size=(n, dims), dtype=np.uint8)
    return pack_bit_rows(bits)


def random_index(rng, n, dims):
    return index_from_packed(dims, random_words(rng, n, dims))
