"""Likelihood-ratio martingales between two forward g-chains.

Both chains start from point-mass pasts, ``omega`` and ``omega_tilde``.  Paths
are drawn under the ``omega_tilde`` chain; at step ``t`` the new symbol
``x_{-t}`` has probability

    P_t  = g(x_{-t}, ..., x_{-1}, omega)
    P~_t = g(x_{-t}, ..., x_{-1}, omega_tilde)

under the two chains.  The two evaluation points agree in their first ``t``
coordinates, so ``|P~_t - P_t| <= v_t``.  The log likelihood ratio

    log M_n = sum_{t<=n} log(P~_t / P_t)

splits into the previsible compensator ``A_n`` (sum of one-step
Kullback-Leibler divergences, computed exactly) and the martingale
``eta_n = log M_n - A_n``.  ``log_m`` is stored as ``A + eta`` so the
decomposition holds bit for bit.

The full history conditions every step (no window), which costs O(n^2) per
replica for long-range g.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError
from .gchain import _run_blocks, inverse_cdf, replica_rng, replica_seed
from .gfunction import Anchor, GFunction, VariationEnvelope


@dataclass(frozen=True, eq=False)
class MartingaleTrace:
    """Arrays indexed by ``t - 1`` for ``t = 1..n``."""

    path: np.ndarray
    log_m: np.ndarray
    A: np.ndarray
    eta: np.ndarray
    anchor: Anchor
    anchor_tilde: Anchor


@dataclass(frozen=True, eq=False)
class TraceEnsemble:
    """Row ``i`` holds replica ``i``; columns are ``t = 1..n``."""

    paths: np.ndarray
    log_m: np.ndarray
    A: np.ndarray
    eta: np.ndarray
    anchor: Anchor
    anchor_tilde: Anchor
    master_seed: Optional[int] = None
    seeds: Optional[np.ndarray] = None

    @property
    def replicas(self) -> int:
        return self.log_m.shape[0]

    @property
    def length(self) -> int:
        return self.log_m.shape[1]

    def trace(self, i: int) -> MartingaleTrace:
        return MartingaleTrace(self.paths[i], self.log_m[i], self.A[i], self.eta[i],
                               self.anchor, self.anchor_tilde)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replica", "t", "logM", "A", "eta"])
            for i in range(self.replicas):
                for t in range(self.length):
                    w.writerow([i, t + 1, repr(float(self.log_m[i, t])),
                                repr(float(self.A[i, t])), repr(float(self.eta[i, t]))])


def _kl(p_tilde: np.ndarray, p: np.ndarray) -> np.ndarray:
    return (p_tilde * np.log(p_tilde / p)).sum(axis=1)


def _trace_block(spec: GFunction, anchor: Anchor, anchor_tilde: Anchor, U: np.ndarray):
    R, n = U.shape
    buf = np.zeros((R, n), dtype=np.int64)
    rows = np.arange(R)
    lr = np.empty((R, n))
    kl = np.empty((R, n))
    for t in range(1, n + 1):
        pos = n - t
        ctx = buf[:, pos + 1:]
        p_tilde = spec.transition_probs(ctx, anchor_tilde)
        p = spec.transition_probs(ctx, anchor)
        s = inverse_cdf(p_tilde, U[:, t - 1])
        buf[:, pos] = s
        lr[:, t - 1] = np.log(p_tilde[rows, s]) - np.log(p[rows, s])
        kl[:, t - 1] = _kl(p_tilde, p)
    A = np.cumsum(kl, axis=1)
    eta = np.cumsum(lr - kl, axis=1)
    return buf[:, ::-1].astype(np.uint8), A + eta, A, eta


def _anchors(spec: GFunction, anchor, anchor_tilde) -> tuple[Anchor, Anchor]:
    return (spec._resolve_anchor(tuple(anchor)), spec._resolve_anchor(tuple(anchor_tilde)))


def likelihood_trace(spec: GFunction, anchor: Sequence[int], anchor_tilde: Sequence[int],
                     n: int, rng: Union[np.random.Generator, np.ndarray]) -> MartingaleTrace:
    """One replica; ``rng`` is a generator or an array of ``n`` uniform draws."""
    if n < 1:
        raise ConfigError("trace length must be >= 1")
    anchor, anchor_tilde = _anchors(spec, anchor, anchor_tilde)
    U = rng.random(n) if isinstance(rng, np.random.Generator) else np.asarray(rng, dtype=float)
    path, log_m, A, eta = _trace_block(spec, anchor, anchor_tilde, U.reshape(1, n))
    return MartingaleTrace(path[0], log_m[0], A[0], eta[0], anchor, anchor_tilde)


def likelihood_traces(spec: GFunction, anchor: Sequence[int], anchor_tilde: Sequence[int],
                      n: int, R: int, master_seed: int, workers: int = 1) -> TraceEnsemble:
    """``R`` replicas, replica ``i`` driven by the stream ``replica_seed(master_seed, i)``."""
    if n < 1 or R < 1:
        raise ConfigError("trace length and replica count must be >= 1")
    anchor, anchor_tilde = _anchors(spec, anchor, anchor_tilde)
    seeds = np.array([replica_seed(master_seed, i) for i in range(R)], dtype=np.uint64)

    def block(a, b):
        U = np.stack([replica_rng(int(s)).random(n) for s in seeds[a:b]])
        return _trace_block(spec, anchor, anchor_tilde, U)

    parts = _run_blocks(block, R, workers)
    paths, log_m, A, eta = (np.vstack(x) for x in zip(*parts))
    return TraceEnsemble(paths, log_m, A, eta, anchor, anchor_tilde, int(master_seed), seeds)


def exact_compensator(spec: GFunction, anchor: Sequence[int], anchor_tilde: Sequence[int],
                      history: Sequence[int]) -> float:
    """Increment of ``A`` at step ``t = len(history) + 1``.

    ``history`` is ``(x_{-1}, ..., x_{-t+1})`` in generation order.  The value
    is ``KL(P~_t || P_t)``, the conditional mean of the next log-ratio
    increment under the ``omega_tilde`` chain.
    """
    anchor, anchor_tilde = _anchors(spec, anchor, anchor_tilde)
    ctx = np.asarray(history, dtype=np.int64)[::-1].reshape(1, -1)
    return float(_kl(spec.transition_probs(ctx, anchor_tilde),
                     spec.transition_probs(ctx, anchor))[0])


@dataclass(frozen=True)
class DoobReport:
    """Empirical constants in ``A_n <= C1 * S_n`` and ``E eta_n^2 <= C2 * S_n``.

    ``S_n`` is the partial square sum of the variation envelope.  ``c1[n-1]``
    is the largest ``A_n / S_n`` over replicas and ``c2[n-1]`` the replica
    mean of ``eta_n^2 / S_n``.
    """

    identically_zero: bool
    c1: Optional[np.ndarray]
    c2: Optional[np.ndarray]
    square_sums: np.ndarray

    @property
    def C1(self) -> float:
        return 0.0 if self.identically_zero else float(self.c1.max())

    @property
    def C2(self) -> float:
        return 0.0 if self.identically_zero else float(self.c2.max())

    def at(self, n: int) -> tuple[float, float]:
        if self.identically_zero:
            return 0.0, 0.0
        return float(self.c1[n - 1]), float(self.c2[n - 1])


def doob_check(ensemble: TraceEnsemble, envelope: VariationEnvelope,
               min_replicas: int = 100) -> DoobReport:
    if ensemble.replicas < min_replicas:
        raise ConfigError(f"doob_check needs >= {min_replicas} replicas")
    ss = envelope.partial_square_sums(ensemble.length)
    if np.all(ss == 0):
        if np.any(ensemble.A != 0) or np.any(ensemble.eta != 0):
            raise ValueError("nonzero martingale with a zero variation envelope")
        return DoobReport(True, None, None, ss)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = ensemble.A.max(axis=0) / ss
        c2 = (ensemble.eta**2).mean(axis=0) / ss
    return DoobReport(False, c1, c2, ss)


def increment_ratios(ensemble: TraceEnsemble, envelope: VariationEnvelope,
                     delta: float) -> np.ndarray:
    """``|log M_t - log M_{t-1}| / (v_t / delta)`` per replica and step; must be <= 1.

    Steps with a zero bound report 0 when the increment is exactly zero and
    ``inf`` otherwise.
    """
    inc = np.abs(np.diff(ensemble.log_m, axis=1, prepend=0.0))
    bound = envelope.values(np.arange(1, ensemble.length + 1)) / delta
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, inc / np.where(bound > 0, bound, 1.0),
                         np.where(inc == 0, 0.0, math.inf))
    return ratio


@dataclass(frozen=True)
class TightnessRow:
    K: float
    sup_frac: float
    argmax_n: int


def tightness_stat(ensemble: TraceEnsemble, K_grid: Sequence[float]) -> list[TightnessRow]:
    """For each ``K``: ``max_n`` of the replica fraction with ``log M_n > K``."""
    K_grid = [float(K) for K in K_grid]
    if any(b <= a for a, b in zip(K_grid, K_grid[1:])):
        raise ConfigError("K_grid must be strictly increasing")
    rows = []
    for K in K_grid:
        frac = (ensemble.log_m > K).mean(axis=0)
        j = int(frac.argmax())
        rows.append(TightnessRow(K, float(frac[j]), j + 1))
    return rows


def write_tightness_csv(rows: Sequence[TightnessRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "sup_frac", "argmax_n"])
        for r in rows:
            w.writerow([repr(r.K), repr(r.sup_frac), r.argmax_n])
