"""Transfer operator, invariant g-measures and convergence experiments.

For a finite-range g (range ``k``) the operator

    (L f)(x) = sum_s g(s.x) f(s.x)

maps a cylinder function of range ``m`` to one of range ``max(k, m) - 1``, so
iterates are computed exactly on dense tables and ``sup_x`` is a max over
finitely many words.  Long-range g-functions enter only through
``gfunction.truncate``, with the truncation bias carried alongside.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, NonConvergenceError
from .gfunction import Bernoulli, FiniteRange, GFunction, truncate
from .shift_core import (
    Alphabet,
    CylinderFunction,
    enumerate_words,
    format_word,
    index_of_word,
    parse_word,
    table_size,
)

MEASURE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MeasureVector:
    """Probabilities of all cylinders of length ``depth``, in table order."""

    alphabet: Alphabet
    depth: int
    probabilities: np.ndarray
    counts: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (table_size(self.alphabet, self.depth),):
            raise ConfigError("measure vector length does not match |S|**depth")
        if p.min() < 0 or abs(p.sum() - 1.0) > MEASURE_TOL:
            raise ConfigError("measure vector must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __getitem__(self, w: Sequence[int]) -> float:
        if len(w) != self.depth:
            raise KeyError(f"word length {len(w)} != depth {self.depth}")
        return float(self.probabilities[index_of_word(w, self.alphabet)])

    def marginal(self) -> MeasureVector:
        """Sum out the last coordinate."""
        if self.depth == 0:
            raise ValueError("depth-0 measure has no coordinate to sum out")
        S = self.alphabet.size
        counts = None
        if self.counts is not None:
            counts = self.counts.reshape(-1, S).sum(axis=1)
        return MeasureVector(self.alphabet, self.depth - 1,
                             self.probabilities.reshape(-1, S).sum(axis=1), counts)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["word", "probability"])
            for word, p in zip(enumerate_words(self.alphabet, self.depth), self.probabilities):
                w.writerow([format_word(word), repr(float(p))])

    @classmethod
    def from_csv(cls, path, alphabet: Alphabet) -> MeasureVector:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        depth = len(rows[0]["word"]) if rows else 0
        p = np.zeros(table_size(alphabet, depth))
        for r in rows:
            p[index_of_word(parse_word(r["word"], alphabet), alphabet)] = float(r["probability"])
        return cls(alphabet, depth, p)


def as_finite_range(spec: GFunction) -> FiniteRange:
    if isinstance(spec, FiniteRange):
        return spec
    if isinstance(spec, Bernoulli):
        return FiniteRange(spec.alphabet, 1, spec.p, delta=spec.delta, anchor=spec.anchor)
    raise ConfigError(f"{spec!r} has infinite range; truncate it first")


def apply_L(spec: GFunction, f: CylinderFunction) -> CylinderFunction:
    """One application of the transfer operator (exact for finite range)."""
    g = as_finite_range(spec)
    if f.alphabet != g.alphabet:
        raise ConfigError("function and g-function live on different alphabets")
    S, k, m = g.alphabet.size, g.k, f.range
    top = max(k, m)
    table_size(g.alphabet, top)
    G, F = g.g.values, f.values
    if m >= k:
        prod = F.reshape(S**k, -1) * G[:, None]
    else:
        prod = G.reshape(S**m, -1) * F[:, None]
    return CylinderFunction(g.alphabet, top - 1, prod.reshape(S, -1).sum(axis=0))


@dataclass
class ConvergenceProfile:
    """One row per iterate ``L^n f``, ``n = 0..n_steps``.

    ``err`` is ``max_x |L^n f - mean|`` (NaN when no mean is supplied).
    ``bias_bound`` bounds ``sup |L^n f - L_trunc^n f|`` for truncated
    long-range g and is ``None`` on the exact path.
    """

    n: np.ndarray
    sup: np.ndarray
    inf: np.ndarray
    osc: np.ndarray
    err: np.ndarray
    mean: Optional[float] = None
    bias_bound: Optional[np.ndarray] = None
    mean_bias_bound: Optional[float] = None
    method: str = "exact"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "sup", "inf", "osc", "err", "bias_bound"])
            for i in range(len(self.n)):
                bias = "" if self.bias_bound is None else repr(float(self.bias_bound[i]))
                w.writerow([int(self.n[i]), repr(float(self.sup[i])), repr(float(self.inf[i])),
                            repr(float(self.osc[i])), repr(float(self.err[i])), bias])


def iterate_L(spec: GFunction, f: CylinderFunction, n_steps: int,
              mean: Optional[float] = None) -> tuple[ConvergenceProfile, CylinderFunction]:
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    sup, inf = np.empty(n_steps + 1), np.empty(n_steps + 1)
    h = f
    for n in range(n_steps + 1):
        if n:
            h = apply_L(spec, h)
        sup[n], inf[n] = h.sup, h.inf
    if mean is None:
        err = np.full(n_steps + 1, np.nan)
    else:
        err = np.maximum(sup - mean, mean - inf)
    profile = ConvergenceProfile(np.arange(n_steps + 1), sup, inf, sup - inf, err, mean)
    return profile, h


def invariant_measure(spec: GFunction, tol: float = 1e-13,
                      max_iters: int = 100_000) -> MeasureVector:
    """Stationary law of the prepend chain on words of length ``k - 1``.

    The state ``u = (x_0..x_{k-2})`` moves to ``(s, u_0..u_{k-3})`` with
    probability ``g(s.u)``.  Power iteration from the uniform vector converges
    once the L1 increment and the fixed-point residual drop below ``tol``;
    sweeps then continue while the increment still shrinks, down to roundoff.
    """
    g = as_finite_range(spec)
    S, k = g.alphabet.size, g.k
    if k <= 1:
        return MeasureVector(g.alphabet, 0, np.array([1.0]))
    G3 = g.g.values.reshape(S, S ** (k - 2), S)

    def sweep(p):
        return (G3 * p.reshape(1, -1, S)).sum(axis=2).reshape(-1)

    pi = np.full(S ** (k - 1), 1.0 / S ** (k - 1))
    converged, last = False, math.inf
    for _ in range(max_iters):
        new = sweep(pi)
        step = np.abs(new - pi).sum()
        if converged and step >= last:
            break
        pi, last = new, step
        if not converged and step < tol:
            residual = np.abs(sweep(pi / pi.sum()) - pi / pi.sum()).sum()
            converged = residual < tol
    if converged:
        # the loop above keeps sweeping past tol until the increment stops shrinking
        return MeasureVector(g.alphabet, k - 1, pi / pi.sum())
    raise NonConvergenceError(
        f"power iteration did not reach tol={tol:g} within {max_iters} sweeps"
    )


def measure_vector(spec: GFunction, pi: MeasureVector, m: int) -> MeasureVector:
    """The g-measure of every cylinder of length ``m``."""
    g = as_finite_range(spec)
    S, k = g.alphabet.size, g.k
    if pi.depth != k - 1:
        raise ConfigError("stationary vector depth does not match g")
    if m <= k - 1:
        p = pi.probabilities.reshape(S**m, -1).sum(axis=1)
        return MeasureVector(g.alphabet, m, p)
    table_size(g.alphabet, m)
    G = g.g.values.reshape(S, S ** (k - 1), 1)
    mu = pi.probabilities
    for d in range(k - 1, m):
        # mu[s.u] = g(s, u_0..u_{k-2}) * mu[u]
        mu = (G * mu.reshape(1, S ** (k - 1), -1)).reshape(-1)
    return MeasureVector(g.alphabet, m, mu)


def cylinder_measure(spec: GFunction, pi: MeasureVector, w: Sequence[int]) -> float:
    g = as_finite_range(spec)
    w = g.alphabet.check_word(w)
    k = g.k
    if len(w) < k - 1:
        raise ConfigError(f"word {format_word(w)} shorter than k-1={k - 1}")
    start = len(w) - (k - 1)
    mu = pi[w[start:]]
    for j in range(start - 1, -1, -1):
        mu *= g.g(w[j:j + k])
    return mu


def integrate(f: CylinderFunction, spec: GFunction, pi: MeasureVector) -> float:
    mu = measure_vector(spec, pi, f.range)
    return float(np.dot(f.values, mu.probabilities))


def duality_check(spec: GFunction, f: CylinderFunction, pi: MeasureVector) -> float:
    """``|int L f dmu - int f dmu|``; zero up to rounding for the true g-measure."""
    return abs(integrate(apply_L(spec, f), spec, pi) - integrate(f, spec, pi))


def convergence_to_mean(spec: GFunction, f: CylinderFunction, n_steps: int,
                        depth: Optional[int] = None, tol: float = 1e-13) -> ConvergenceProfile:
    """Profile of ``max_x |L^n f - mu(f)|``.

    Finite-range g is iterated exactly.  Long-range g is truncated at
    ``depth``; the ``bias_bound`` column then bounds the distance between the
    true and truncated iterates, accumulated over steps.
    """
    if spec.finite_range is not None:
        g = as_finite_range(spec)
        method = "exact"
    else:
        if depth is None:
            raise ConfigError("long-range g needs a truncation depth")
        g = truncate(spec, depth)
        method = f"truncated(k={depth})"
    pi = invariant_measure(g, tol=tol)
    mean = integrate(f, g, pi)
    profile, _ = iterate_L(g, f, n_steps, mean)
    profile.method = method
    if method != "exact":
        # |(L - L_k) h| <= |S| * sup|g - g_k| * osc(h) / 2, and L is a sup-norm contraction
        per_step = g.alphabet.size * g.truncation_error / 2 * profile.osc
        profile.bias_bound = np.concatenate([[0.0], np.cumsum(per_step[:-1])])
        osc = profile.osc
        ratios = osc[-10:][1:] / np.where(osc[-10:][:-1] > 0, osc[-10:][:-1], np.inf)
        rho = float(min(ratios.max(), 0.999)) if ratios.size else 0.0
        tail = per_step[-1] * (1.0 + rho / (1.0 - rho))
        profile.mean_bias_bound = float(profile.bias_bound[-1] + tail)
    return profile


@dataclass(frozen=True)
class RateFit:
    """Least-squares fits of ``log e_n`` against ``n`` and against ``log n``.

    Instrumentation only: neither model is asserted to be correct.
    """

    n_points: int
    first_n: Optional[int]
    last_n: Optional[int]
    geometric_slope: float
    geometric_intercept: float
    geometric_rss: float
    polynomial_exponent: float
    polynomial_intercept: float
    polynomial_rss: float
    exact_step: Optional[int] = None
    floor_step: Optional[int] = None
    label: str = "EXPLORATORY"

    @property
    def geometric_rate(self) -> float:
        return math.exp(self.geometric_slope)

    @property
    def lower_residual_model(self) -> Optional[str]:
        if self.n_points == 0:
            return None
        return "geometric" if self.geometric_rss <= self.polynomial_rss else "polynomial"

    def rows(self) -> list[tuple[str, object]]:
        return [
            ("label", self.label),
            ("n_points", self.n_points),
            ("first_n", self.first_n),
            ("last_n", self.last_n),
            ("geometric_slope", self.geometric_slope),
            ("geometric_rate", self.geometric_rate if self.n_points else math.nan),
            ("geometric_rss", self.geometric_rss),
            ("polynomial_exponent", self.polynomial_exponent),
            ("polynomial_rss", self.polynomial_rss),
            ("lower_residual_model", self.lower_residual_model),
            ("exact_step", self.exact_step),
            ("floor_step", self.floor_step),
        ]


def _lstsq(x, y):
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rss = float(res[0]) if len(res) else 0.0
    return float(coef[0]), float(coef[1]), rss


def _tail_start(above: np.ndarray) -> Optional[int]:
    """First index of the trailing run of False entries, or None if there is none."""
    hits = np.flatnonzero(above)
    start = int(hits[-1]) + 1 if hits.size else 0
    return start if start < above.size else None


def rate_fit(profile: Union[ConvergenceProfile, Sequence[float]], floor: float = 0.0,
             min_points: int = 10) -> RateFit:
    """Fit geometric and polynomial decay models to an error sequence ``e_0, e_1, ...``.

    Rows with ``n = 0`` or ``e_n <= floor`` are excluded.  An all-zero tail is
    reported as exact convergence at its first step (``exact_step``); a tail
    at or below the floor is reported the same way as ``floor_step``.  Either
    one makes a profile with too few fit rows a valid degenerate report.
    """
    err = np.asarray(profile.err if isinstance(profile, ConvergenceProfile) else profile,
                     dtype=float)
    n = np.arange(err.size)
    if np.isnan(err).any():
        raise ConfigError("error sequence contains NaN (no reference mean?)")
    exact_step = _tail_start(err > 0)
    floor_step = _tail_start(err > floor) if floor > 0 else None
    keep = (n >= 1) & (err > floor)
    if keep.sum() < min_points:
        if exact_step is not None or floor_step is not None:
            nan = math.nan
            return RateFit(int(keep.sum()), None, None, nan, nan, nan, nan, nan, nan,
                           exact_step, floor_step)
        raise ConfigError(f"need at least {min_points} rows with e_n > {floor}, got {keep.sum()}")
    x, y = n[keep].astype(float), np.log(err[keep])
    gs, gi, grss = _lstsq(x, y)
    ps, pi_, prss = _lstsq(np.log(x), y)
    return RateFit(int(keep.sum()), int(x[0]), int(x[-1]), gs, gi, grss, ps, pi_, prss,
                   exact_step, floor_step)
