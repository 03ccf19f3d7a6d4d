"""g-function families with certified variation envelopes.

A g-function assigns to every point ``x = (x_0, x_1, ...)`` the probability of
its first symbol given the rest, so ``sum_s g(s.x') = 1`` for every ``x'``.
Three families are provided:

* ``Bernoulli``: ``g(x) = p[x_0]``.
* ``FiniteRange``: ``g`` depends on ``x_0..x_{k-1}`` through a dense table.
* ``LongRangeAdditive``: ``g(s.x) = 1/|S| + sign(s) * sum_{n>=1} c n^-alpha sign(x_n)``.
  Its variations decay like ``n^(1-alpha)``, so ``alpha`` in ``(3/2, 2]``
  gives square-summable but non-summable variations.

Points are finite words closed off by a periodic tail anchor ``omega``: the
word ``w`` stands for ``(w_0, ..., w_{d-1}, omega_0, omega_1, ...)``.
"""
from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .errors import ConfigError
from .shift_core import (
    Alphabet,
    CylinderFunction,
    Word,
    format_word,
    parse_word,
    table_size,
    variation,
    word_digits,
)

DEFAULT_DELTA = 0.05
NORMALIZATION_TOL = 1e-12

# variations of LongRangeAdditive decay like n^(1 - alpha)
SQUARE_SUMMABLE_ALPHA = 1.5
SUMMABLE_ALPHA = 2.0

Anchor = tuple[int, ...]


def anchor_symbols(anchor: Anchor, start: int, count: int) -> np.ndarray:
    """``omega_start, ..., omega_{start+count-1}`` of a periodic anchor."""
    return np.asarray(anchor, dtype=np.int64)[(start + np.arange(count)) % len(anchor)]


@dataclass(frozen=True)
class VariationEnvelope:
    """Certified upper bounds ``v_n >= var_n g`` for ``n >= 1``.

    ``total_sum`` and ``total_square_sum`` are the limits of the partial sums
    (``inf`` when divergent).
    """

    values: Callable[[np.ndarray], np.ndarray]
    total_sum: float
    total_square_sum: float
    decay_exponent: Optional[float] = None

    def __call__(self, n: int) -> float:
        return float(self.values(np.array([n]))[0])

    def partial_sum(self, n: int) -> float:
        return float(self.partial_sums(n)[-1]) if n >= 1 else 0.0

    def partial_square_sum(self, n: int) -> float:
        return float(self.partial_square_sums(n)[-1]) if n >= 1 else 0.0

    def partial_sums(self, n: int) -> np.ndarray:
        """Array of ``sum_{t<=j} v_t`` for ``j = 1..n``."""
        return np.cumsum(self.values(np.arange(1, n + 1)))

    def partial_square_sums(self, n: int) -> np.ndarray:
        return np.cumsum(self.values(np.arange(1, n + 1)) ** 2)

    @property
    def summable(self) -> bool:
        return math.isfinite(self.total_sum)

    @property
    def square_summable(self) -> bool:
        return math.isfinite(self.total_square_sum)


@dataclass(frozen=True)
class RegimeReport:
    horizon: int
    partial_sum: float
    partial_square_sum: float
    total_sum: float
    total_square_sum: float
    summable: bool
    square_summable: bool
    decay_exponent: Optional[float]

    @property
    def verdict(self) -> str:
        if self.summable:
            return "summable"
        if self.square_summable:
            return "square-summable, not summable"
        return "neither summable nor square-summable"


def classify(env: VariationEnvelope, horizon: int) -> RegimeReport:
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    return RegimeReport(
        horizon=horizon,
        partial_sum=env.partial_sum(horizon),
        partial_square_sum=env.partial_square_sum(horizon),
        total_sum=env.total_sum,
        total_square_sum=env.total_square_sum,
        summable=env.summable,
        square_summable=env.square_summable,
        decay_exponent=env.decay_exponent,
    )


def _check_anchor(alphabet: Alphabet, anchor: Sequence[int]) -> Anchor:
    anchor = alphabet.check_word(anchor)
    if not anchor:
        raise ConfigError("tail anchor needs at least one symbol")
    return anchor


class GFunction(ABC):
    """Common interface of the g-function families.

    Subclasses implement ``transition_probs``; everything else is derived
    from it so that scalar and batched evaluation share one code path.
    """

    alphabet: Alphabet
    delta: float
    anchor: Anchor
    #: range ``k`` when ``g`` depends on finitely many coordinates, else None
    finite_range: Optional[int] = None

    @abstractmethod
    def transition_probs(self, ctx: np.ndarray, anchor: Optional[Anchor] = None) -> np.ndarray:
        """Next-symbol probabilities given contexts.

        ``ctx`` has shape ``(R, L)``: row ``r`` holds ``x_1, ..., x_L`` of a
        point, after which the point continues with the anchor.  Returns an
        ``(R, |S|)`` array whose column ``s`` is ``g(s, x_1, ..., x_L, omega)``.
        """

    @abstractmethod
    def envelope(self) -> VariationEnvelope:
        ...

    def eval_g(self, w: Sequence[int], depth: Optional[int] = None,
               anchor: Optional[Anchor] = None) -> float:
        """``g`` at the point ``w`` followed by the anchor.

        A ``depth`` shorter than ``w`` truncates ``w`` first.
        """
        w = self.alphabet.check_word(w)
        if not w:
            raise ConfigError("eval_g needs a non-empty word")
        if depth is not None and depth < len(w):
            if depth < 1:
                raise ConfigError("depth must be >= 1")
            w = w[:depth]
        ctx = np.asarray(w[1:], dtype=np.int64).reshape(1, -1)
        return float(self.transition_probs(ctx, anchor)[0, w[0]])

    def table(self, k: int, anchor: Optional[Anchor] = None) -> np.ndarray:
        """``g`` at every word of length ``k`` closed by the anchor (table order)."""
        if k < 1:
            raise ConfigError("table depth must be >= 1")
        table_size(self.alphabet, k)
        ctx = word_digits(self.alphabet, k - 1)
        probs = self.transition_probs(ctx, anchor)
        # row index = context, column = x_0; table order puts x_0 first
        return np.ascontiguousarray(probs.T).reshape(-1)

    def _resolve_anchor(self, anchor: Optional[Anchor]) -> Anchor:
        return self.anchor if anchor is None else _check_anchor(self.alphabet, anchor)


class Bernoulli(GFunction):
    finite_range = 1

    def __init__(self, p: Sequence[float], delta: float = DEFAULT_DELTA,
                 anchor: Sequence[int] = (0,)):
        p = np.array(p, dtype=float)
        self.alphabet = Alphabet(len(p))
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise ConfigError(f"Bernoulli probabilities sum to {p.sum()!r}, not 1")
        if not delta > 0 or p.min() < delta:
            raise ConfigError(f"Bernoulli probabilities must be >= delta={delta}")
        p.setflags(write=False)
        self.p = p
        self.delta = float(delta)
        self.anchor = _check_anchor(self.alphabet, anchor)

    def __repr__(self):
        return f"Bernoulli(p={self.p.tolist()})"

    def transition_probs(self, ctx, anchor=None):
        return np.broadcast_to(self.p, (np.shape(ctx)[0], self.alphabet.size)).copy()

    def envelope(self):
        return VariationEnvelope(
            values=lambda ns: np.zeros(np.shape(ns)), total_sum=0.0, total_square_sum=0.0
        )


class FiniteRange(GFunction):
    """``g`` given by a table over words of length ``k``.

    ``table`` is indexed like a ``CylinderFunction`` of range ``k``: the
    first coordinate is the emitted symbol, the rest is the context.
    ``truncation_error`` records a sup-distance bound to a long-range parent.
    """

    def __init__(self, alphabet: Alphabet, k: int, table, delta: float = DEFAULT_DELTA,
                 anchor: Sequence[int] = (0,), truncation_error: float = 0.0):
        if k < 1:
            raise ConfigError("finite range k must be >= 1")
        if isinstance(table, CylinderFunction):
            table = table.values
        f = CylinderFunction(alphabet, k, table)
        rows = f.values.reshape(alphabet.size, -1)
        dev = np.abs(rows.sum(axis=0) - 1.0).max()
        if dev > NORMALIZATION_TOL:
            raise ConfigError(f"g-table is not normalized: context sums deviate by {dev:.3g}")
        if not delta > 0 or f.values.min() < delta:
            raise ConfigError(f"g-table values must be >= delta={delta}, min is {f.values.min()}")
        self.alphabet = alphabet
        self.finite_range = k
        self.k = k
        self.g = f
        self.delta = float(delta)
        self.anchor = _check_anchor(alphabet, anchor)
        self.truncation_error = float(truncation_error)
        self._cols = np.ascontiguousarray(rows.T)

    def __repr__(self):
        return f"FiniteRange(k={self.k}, |S|={self.alphabet.size})"

    def transition_probs(self, ctx, anchor=None):
        ctx = np.asarray(ctx, dtype=np.int64)
        need = self.k - 1
        if ctx.shape[1] < need:
            pad = anchor_symbols(self._resolve_anchor(anchor), 0, need - ctx.shape[1])
            ctx = np.hstack([ctx, np.broadcast_to(pad, (ctx.shape[0], pad.size))])
        idx = np.zeros(ctx.shape[0], dtype=np.int64)
        for j in range(need):
            idx = idx * self.alphabet.size + ctx[:, j]
        return self._cols[idx]

    def table(self, k, anchor=None):
        if k >= self.k:
            return self.g.extend(k).values.copy()
        return super().table(k, anchor)

    def envelope(self):
        v = np.array([variation(self.g, n) for n in range(1, self.k)] + [0.0])
        # variation is nonincreasing in n, so v is too

        def values(ns):
            ns = np.asarray(ns)
            return v[np.clip(ns, 1, self.k) - 1]

        return VariationEnvelope(values=values, total_sum=float(v.sum()),
                                 total_square_sum=float((v**2).sum()))


class LongRangeAdditive(GFunction):
    """``g(s.x) = 1/|S| + sign(s) * sum_{n>=1} c n^-alpha sign(x_n)``.

    ``sign`` maps symbols to weights in ``[-1, 1]`` summing to zero; the
    default is ``(+1, -1, 0, ..., 0)``.
    """

    _SQUARE_TAIL_N = 10**6

    def __init__(self, alphabet: Alphabet, alpha: float, c: float,
                 sign: Optional[Sequence[float]] = None, delta: float = DEFAULT_DELTA,
                 anchor: Sequence[int] = (0,)):
        if not alpha > 1:
            raise ConfigError(f"alpha must be > 1, got {alpha}")
        if not c > 0:
            raise ConfigError(f"c must be > 0, got {c}")
        if sign is None:
            sign = [1.0, -1.0] + [0.0] * (alphabet.size - 2)
        sign = np.array(sign, dtype=float)
        if sign.shape != (alphabet.size,):
            raise ConfigError(f"sign map needs {alphabet.size} entries")
        if np.abs(sign).max() > 1 or abs(sign.sum()) > NORMALIZATION_TOL:
            raise ConfigError("sign map entries must lie in [-1, 1] and sum to 0")
        smax = float(np.abs(sign).max())
        if not delta > 0 or c * float(zeta(alpha)) * smax > 1.0 / alphabet.size - delta:
            raise ConfigError(
                f"c*zeta(alpha)*max|sign| = {c * float(zeta(alpha)) * smax:.6g} exceeds "
                f"1/|S| - delta = {1.0 / alphabet.size - delta:.6g}"
            )
        sign.setflags(write=False)
        self.alphabet = alphabet
        self.alpha = float(alpha)
        self.c = float(c)
        self.sign = sign
        self.delta = float(delta)
        self.anchor = _check_anchor(alphabet, anchor)
        self._weights = np.empty(0)
        self._envelope = None

    def __repr__(self):
        return f"LongRangeAdditive(alpha={self.alpha}, c={self.c}, |S|={self.alphabet.size})"

    def weights(self, L: int) -> np.ndarray:
        """``c * n^-alpha`` for ``n = 1..L``."""
        if self._weights.size < L:
            n = np.arange(1, max(L, 2 * self._weights.size) + 1, dtype=float)
            self._weights = self.c * n**-self.alpha
        return self._weights[:L]

    def tail(self, L: int, anchor: Optional[Anchor] = None) -> float:
        """``sum_{n>L} c n^-alpha sign(omega_{n-L-1})`` for a periodic anchor."""
        return _anchor_tail(self.alpha, self.c, tuple(self.sign), self._resolve_anchor(anchor), L)

    def transition_probs(self, ctx, anchor=None):
        ctx = np.asarray(ctx, dtype=np.int64)
        L = ctx.shape[1]
        h = (self.sign[ctx] * self.weights(L)).sum(axis=1) + self.tail(L, anchor)
        return 1.0 / self.alphabet.size + h[:, None] * self.sign[None, :]

    def envelope(self):
        if self._envelope is None:
            self._envelope = self._build_envelope()
        return self._envelope

    def _build_envelope(self):
        a, c = self.alpha, self.c
        spread = float(self.sign.max() - self.sign.min()) * float(np.abs(self.sign).max())
        amp = c * spread

        def values(ns):
            return amp * zeta(a, np.asarray(ns, dtype=float))

        # sum_n zeta(a, n) = sum_m m * m^-a = zeta(a - 1)
        total = amp * float(zeta(a - 1)) if a > SUMMABLE_ALPHA else math.inf
        if a > SQUARE_SUMMABLE_ALPHA:
            N = self._SQUARE_TAIL_N
            head = float(np.sum(values(np.arange(1, N + 1)) ** 2))
            # v_n ~ amp n^(1-a)/(a-1); midpoint-closed integral of the square
            tail = amp**2 / (a - 1) ** 2 * (N + 0.5) ** (3 - 2 * a) / (2 * a - 3)
            total_sq = head + tail
        else:
            total_sq = math.inf
        return VariationEnvelope(values=values, total_sum=total, total_square_sum=total_sq,
                                 decay_exponent=1.0 - a)


@lru_cache(maxsize=4096)
def _anchor_tail(alpha: float, c: float, sign: tuple, anchor: Anchor, L: int) -> float:
    p = len(anchor)
    total = 0.0
    for r, s in enumerate(anchor):
        if sign[s]:
            # sum_{j>=0} (L + 1 + r + j p)^-alpha = p^-alpha zeta(alpha, (L + 1 + r) / p)
            total += sign[s] * p**-alpha * float(zeta(alpha, (L + 1 + r) / p))
    return c * total


def truncate(spec: GFunction, k: int) -> FiniteRange:
    """Finite-range approximation: close contexts of length ``k - 1`` with the anchor.

    Each context's row is renormalized; the sup-distance to ``spec`` is at
    most ``2 v_k``, recorded as ``truncation_error``.
    """
    table_size(spec.alphabet, k)
    values = spec.table(k)
    rows = values.reshape(spec.alphabet.size, -1)
    rows = rows / rows.sum(axis=0)
    err = 0.0 if spec.finite_range is not None and k >= spec.finite_range else 2 * spec.envelope()(k)
    return FiniteRange(spec.alphabet, k, rows.reshape(-1), delta=min(spec.delta, float(rows.min())),
                       anchor=spec.anchor, truncation_error=err)


def log_variation(spec: GFunction, n: int, depth: int) -> float:
    """Brute-force ``var_n log g`` over the anchored depth-``depth`` table."""
    if depth < n:
        raise ConfigError("depth must be >= n")
    return variation(CylinderFunction(spec.alphabet, depth, np.log(spec.table(depth))), n)


def example_finite_range(delta: float = DEFAULT_DELTA,
                         anchor: Sequence[int] = (0,)) -> FiniteRange:
    """Two-symbol, range-2 table: g(0,0)=0.9, g(1,0)=0.1, g(0,1)=0.2, g(1,1)=0.8."""
    return FiniteRange(Alphabet(2), 2, [0.9, 0.2, 0.1, 0.8], delta=delta, anchor=anchor)


def write_table_csv(spec: FiniteRange, path) -> None:
    """One row per (context, symbol); context is the symbol string ``x_1..x_{k-1}``."""
    S = spec.alphabet.size
    ctxs = word_digits(spec.alphabet, spec.k - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["context", "symbol", "value"])
        for ci, ctx in enumerate(ctxs):
            for s in range(S):
                w.writerow([format_word(ctx), s, repr(float(spec._cols[ci, s]))])


def read_table_csv(path, alphabet_size: Optional[int] = None,
                   delta: float = DEFAULT_DELTA, anchor: Sequence[int] = (0,)) -> FiniteRange:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"context", "symbol", "value"}:
        raise ConfigError(f"{path}: expected header context,symbol,value")
    if alphabet_size is None:
        alphabet_size = 1 + max(max(int(r["symbol"]) for r in rows),
                                max((int(ch, 16) for r in rows for ch in r["context"]), default=0))
    alphabet = Alphabet(max(alphabet_size, 2))
    k = len(rows[0]["context"]) + 1
    table = np.full(table_size(alphabet, k), np.nan)
    for r in rows:
        ctx: Word = parse_word(r["context"], alphabet)
        if len(ctx) != k - 1:
            raise ConfigError(f"{path}: inconsistent context lengths")
        s = int(r["symbol"])
        idx = s
        for sym in ctx:
            idx = idx * alphabet.size + sym
        table[idx] = float(r["value"])
    if np.isnan(table).any():
        raise ConfigError(f"{path}: table has missing (context, symbol) rows")
    return FiniteRange(alphabet, k, table, delta=delta, anchor=anchor)
