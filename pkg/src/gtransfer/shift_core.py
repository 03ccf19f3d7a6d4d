"""Alphabets, words and dense cylinder tables for the one-sided shift.

A word ``w = (w_0, ..., w_{d-1})`` names the cylinder of points whose first
``d`` coordinates are ``w``; ``w_0`` is the coordinate ``x_0``.  Prepending a
symbol ``s`` to ``w`` gives a preimage of ``w`` under the shift, so
``preimage_words`` is the finite shadow of ``T^{-1}``.

Tables over all words of length ``d`` are stored densely in lexicographic
order, with ``x_0`` as the most significant digit::

    index(w) = sum_i w_i * |S|**(d - 1 - i)

which means ``values.reshape((|S|,) * d)[w]`` addresses ``w`` directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, TableLimitError

MAX_ALPHABET = 16
MAX_TABLE_ENTRIES = 2**26

Word = tuple[int, ...]


@dataclass(frozen=True)
class Alphabet:
    """The finite symbol set ``{0, ..., size - 1}``."""

    size: int
    max_size: int = field(default=MAX_ALPHABET, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 2:
            raise ConfigError(f"alphabet size must be an integer >= 2, got {self.size!r}")
        if self.size > self.max_size:
            raise ConfigError(f"alphabet size {self.size} exceeds maximum {self.max_size}")

    def check_word(self, w: Sequence[int]) -> Word:
        w = tuple(int(s) for s in w)
        for s in w:
            if not 0 <= s < self.size:
                raise ConfigError(f"symbol {s} outside alphabet of size {self.size}")
        return w


def table_size(alphabet: Alphabet, d: int, limit: int = MAX_TABLE_ENTRIES) -> int:
    """Return ``|S|**d``, raising ``TableLimitError`` if it exceeds ``limit``."""
    if d < 0:
        raise ConfigError(f"word length must be >= 0, got {d}")
    n = alphabet.size**d
    if n > limit:
        raise TableLimitError(d, alphabet.size, limit)
    return n


def index_of_word(w: Sequence[int], alphabet: Alphabet) -> int:
    idx = 0
    for s in w:
        idx = idx * alphabet.size + int(s)
    return idx


def word_of_index(index: int, d: int, alphabet: Alphabet) -> Word:
    out = [0] * d
    for i in range(d - 1, -1, -1):
        index, out[i] = divmod(index, alphabet.size)
    if index:
        raise ValueError("index out of range for word length")
    return tuple(out)


def enumerate_words(alphabet: Alphabet, d: int, limit: int = MAX_TABLE_ENTRIES) -> list[Word]:
    """All words of length ``d`` in lexicographic (table) order."""
    n = table_size(alphabet, d, limit)
    return [word_of_index(i, d, alphabet) for i in range(n)]


def word_digits(alphabet: Alphabet, d: int, limit: int = MAX_TABLE_ENTRIES) -> np.ndarray:
    """Integer array of shape ``(|S|**d, d)``; row ``i`` is the word with index ``i``."""
    n = table_size(alphabet, d, limit)
    idx = np.arange(n)
    digits = np.empty((n, d), dtype=np.int64)
    for i in range(d - 1, -1, -1):
        idx, digits[:, i] = np.divmod(idx, alphabet.size)
    return digits


def preimage_words(w: Sequence[int], alphabet: Alphabet) -> list[Word]:
    """Words ``s.w`` for every symbol ``s``, in symbol order."""
    w = alphabet.check_word(w)
    return [(s,) + w for s in range(alphabet.size)]


def format_word(w: Sequence[int]) -> str:
    """Symbol string; digits are used directly, so alphabets above 10 use ``a``-``f``."""
    return "".join("0123456789abcdef"[s] for s in w)


def parse_word(text: str, alphabet: Alphabet) -> Word:
    try:
        w = tuple(int(ch, 16) for ch in text.strip())
    except ValueError:
        raise ConfigError(f"cannot parse word {text!r}") from None
    return alphabet.check_word(w)


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """A real function of the first ``range`` coordinates, as a dense table."""

    alphabet: Alphabet
    range: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        n = table_size(self.alphabet, self.range)
        if values.shape != (n,):
            raise ConfigError(
                f"table for range {self.range} needs {n} entries, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigError("cylinder function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, alphabet: Alphabet, c: float) -> CylinderFunction:
        return cls(alphabet, 0, np.array([float(c)]))

    @classmethod
    def indicator(cls, alphabet: Alphabet, w: Sequence[int]) -> CylinderFunction:
        """Indicator of the cylinder ``[w]``."""
        w = alphabet.check_word(w)
        values = np.zeros(alphabet.size ** len(w))
        values[index_of_word(w, alphabet)] = 1.0
        return cls(alphabet, len(w), values)

    @classmethod
    def coordinate(cls, alphabet: Alphabet) -> CylinderFunction:
        """``f(x) = x_0``."""
        return cls(alphabet, 1, np.arange(alphabet.size, dtype=float))

    def __call__(self, w: Sequence[int]) -> float:
        if len(w) < self.range:
            raise ValueError(f"need at least {self.range} coordinates, got {len(w)}")
        return float(self.values[index_of_word(w[: self.range], self.alphabet)])

    def extend(self, m: int) -> CylinderFunction:
        """The same function viewed as a table of range ``m >= range``."""
        if m < self.range:
            raise ValueError("cannot shrink the range of a cylinder function")
        reps = table_size(self.alphabet, m - self.range)
        return CylinderFunction(self.alphabet, m, np.repeat(self.values, reps))

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def inf(self) -> float:
        return float(self.values.min())

    @property
    def osc(self) -> float:
        return float(np.ptp(self.values))


def variation(f: CylinderFunction, n: int) -> float:
    """``var_n f``: largest oscillation of ``f`` over a cylinder of length ``n``.

    ``n = 0`` gives the global oscillation; ``n >= f.range`` gives 0.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n >= f.range:
        return 0.0
    blocks = f.values.reshape(f.alphabet.size**n, -1)
    return float(np.ptp(blocks, axis=1).max())
