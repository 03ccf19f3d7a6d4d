import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gtransfer.errors import ConfigError, TableLimitError
from gtransfer.shift_core import (
    Alphabet,
    CylinderFunction,
    enumerate_words,
    index_of_word,
    preimage_words,
    variation,
    word_digits,
    word_of_index,
)

from .oracles import variation_all_pairs, words


def test_alphabet_bounds():
    with pytest.raises(ConfigError):
        Alphabet(1)
    with pytest.raises(ConfigError):
        Alphabet(17)
    assert Alphabet(16).size == 16


def test_enumerate_words_examples():
    assert enumerate_words(Alphabet(2), 0) == [()]
    assert enumerate_words(Alphabet(2), 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    ws = enumerate_words(Alphabet(3), 2)
    assert len(ws) == 9
    assert ws.index((1, 2)) == 5 == index_of_word((1, 2), Alphabet(3))


def test_enumerate_limit_names_depth_and_size():
    with pytest.raises(TableLimitError, match=r"d=30.*\|S\|=2"):
        enumerate_words(Alphabet(2), 30)


def test_word_digits_matches_enumeration():
    A = Alphabet(3)
    assert [tuple(r) for r in word_digits(A, 3)] == enumerate_words(A, 3)


@given(st.integers(2, 5), st.integers(0, 10), st.data())
def test_index_round_trip(S, d, data):
    A = Alphabet(S)
    w = tuple(data.draw(st.lists(st.integers(0, S - 1), min_size=d, max_size=d)))
    assert word_of_index(index_of_word(w, A), d, A) == w


def test_preimage_examples():
    assert preimage_words((), Alphabet(2)) == [(0,), (1,)]
    assert preimage_words((0, 1), Alphabet(2)) == [(0, 0, 1), (1, 0, 1)]
    assert preimage_words((2,), Alphabet(3)) == [(0, 2), (1, 2), (2, 2)]


@given(st.integers(2, 4), st.lists(st.integers(0, 1), max_size=6))
def test_preimages_share_suffix(S, w):
    pre = preimage_words(w, Alphabet(S))
    assert all(p[1:] == tuple(w) for p in pre)
    assert len({p[0] for p in pre}) == S


def test_variation_examples():
    A = Alphabet(2)
    ind = CylinderFunction.indicator(A, (1,))
    assert variation(ind, 0) == 1.0
    assert variation(ind, 1) == 0.0
    f = CylinderFunction(A, 2, [0.9, 0.1, 0.2, 0.8])
    assert variation(f, 1) == pytest.approx(0.8, abs=1e-15)
    oracle = variation_all_pairs(dict(zip(words(2, 2), f.values)), 2, 2, 1)
    assert variation(f, 1) == pytest.approx(oracle, abs=1e-15)


@settings(max_examples=50)
@given(st.integers(2, 3), st.integers(1, 4), st.data())
def test_variation_matches_all_pairs_and_is_monotone(S, m, data):
    vals = data.draw(arrays(float, S**m, elements=st.floats(-5, 5)))
    f = CylinderFunction(Alphabet(S), m, vals)
    table = dict(zip(words(S, m), vals))
    var = [variation(f, n) for n in range(m + 3)]
    for n in range(m + 1):
        assert var[n] == pytest.approx(variation_all_pairs(table, S, m, n), abs=1e-12)
    assert all(a >= b for a, b in zip(var, var[1:]))
    assert var[m:] == [0.0, 0.0, 0.0]


def test_cylinder_function_is_immutable_and_validated():
    f = CylinderFunction(Alphabet(2), 1, [1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 3.0
    with pytest.raises(ConfigError):
        CylinderFunction(Alphabet(2), 2, [1.0, 2.0])
    with pytest.raises(ConfigError):
        CylinderFunction(Alphabet(2), 1, [1.0, np.nan])


def test_extend_and_call():
    f = CylinderFunction(Alphabet(2), 1, [1.0, 2.0])
    e = f.extend(3)
    assert all(e(w) == f(w) for w in enumerate_words(Alphabet(2), 3))
