"""Monte Carlo simulation of forward g-chains.

A g-chain is generated by repeatedly prepending a symbol drawn from
``g(. , x_1, x_2, ...)``: after ``t`` steps the current point is

    x^(t) = (x_{-t}, x_{-t+1}, ..., x_{-1}, omega_0, omega_1, ...)

where ``omega`` is the tail anchor (a point-mass past).  Path arrays store
symbols in generation order, so array index ``t - 1`` holds ``x_{-t}``.

Only the newest ``window`` symbols condition the next draw; older ones are
replaced by the anchor, which perturbs each transition probability by at
most ``v_window`` for long-range g.

Every replica owns a random stream derived from ``(master_seed, replica)``,
and replicas are processed in fixed-size blocks, so results do not depend on
the number of worker threads.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError
from .gfunction import Anchor, GFunction, anchor_symbols
from .shift_core import Alphabet, CylinderFunction, Word, table_size
from .transfer import MeasureVector

DEFAULT_WINDOW = 64
BLOCK = 512


def replica_seed(master_seed: int, replica: int) -> int:
    """64-bit seed of replica ``replica``, hashed from the master seed."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),))
    return int(ss.generate_state(1, np.uint64)[0])


def replica_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """First symbol ``s`` with ``u < cumsum(probs)[s]``, row by row."""
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    return (u[:, None] >= cum).sum(axis=1)


@dataclass(frozen=True)
class ChainState:
    """The newest ``W`` coordinates of the current point (index 0 newest)."""

    window: Word
    anchor: Anchor
    t: int = 0
    W: int = DEFAULT_WINDOW
    stream: int = 0


def step(spec: GFunction, state: ChainState,
         rng: Union[np.random.Generator, float]) -> ChainState:
    """Prepend one symbol.  ``rng`` may be a generator or a uniform draw in [0, 1)."""
    u = rng.random() if isinstance(rng, np.random.Generator) else float(rng)
    ctx = np.asarray(state.window, dtype=np.int64).reshape(1, -1)
    probs = spec.transition_probs(ctx, state.anchor)
    s = int(inverse_cdf(probs, np.array([u]))[0])
    window = ((s,) + state.window)[: state.W]
    return ChainState(window, state.anchor, state.t + 1, state.W, state.stream)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``paths[i, t - 1]`` is ``x_{-t}`` of replica ``i``."""

    paths: np.ndarray
    master_seed: int
    seeds: np.ndarray
    anchor: Anchor
    window: int
    alphabet: Alphabet
    window_error: float = 0.0

    @property
    def replicas(self) -> int:
        return self.paths.shape[0]

    @property
    def length(self) -> int:
        return self.paths.shape[1]

    def to_binary(self, path) -> None:
        """One byte per symbol, replica-major."""
        np.ascontiguousarray(self.paths, dtype=np.uint8).tofile(path)

    def write_replica_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replica", "seed", "length"])
            for i, seed in enumerate(self.seeds):
                w.writerow([i, int(seed), self.length])

    @staticmethod
    def read_binary(path, replicas: int, length: int) -> np.ndarray:
        return np.fromfile(path, dtype=np.uint8).reshape(replicas, length)


def _blocks(R: int, block: int) -> list[tuple[int, int]]:
    return [(a, min(a + block, R)) for a in range(0, R, block)]


def _run_blocks(fn, R: int, workers: int, block: int = BLOCK) -> list:
    blocks = _blocks(R, block)
    if workers <= 1 or len(blocks) == 1:
        return [fn(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), blocks))


def _sample_block(spec: GFunction, anchor: Anchor, n: int, window: int,
                  seeds: np.ndarray) -> np.ndarray:
    U = np.stack([replica_rng(int(s)).random(n) for s in seeds])
    buf = np.zeros((len(seeds), n), dtype=np.int64)
    # newest symbol sits leftmost: x_{-t} goes to column n - t
    for t in range(1, n + 1):
        pos = n - t
        L = min(t - 1, window)
        probs = spec.transition_probs(buf[:, pos + 1: pos + 1 + L], anchor)
        buf[:, pos] = inverse_cdf(probs, U[:, t - 1])
    return buf[:, ::-1].astype(np.uint8)


def sample_paths(spec: GFunction, anchor: Optional[Sequence[int]], n: int, R: int,
                 master_seed: int, window: int = DEFAULT_WINDOW,
                 workers: int = 1) -> PathEnsemble:
    """``R`` independent forward g-chains of length ``n`` started from the anchor."""
    if n < 1 or R < 1:
        raise ConfigError("path length and replica count must be >= 1")
    if window < 1:
        raise ConfigError("window must be >= 1")
    if spec.finite_range is not None and window < spec.finite_range - 1:
        raise ConfigError(f"window {window} shorter than context length {spec.finite_range - 1}")
    anchor = spec._resolve_anchor(None if anchor is None else tuple(anchor))
    seeds = np.array([replica_seed(master_seed, i) for i in range(R)], dtype=np.uint64)
    parts = _run_blocks(lambda a, b: _sample_block(spec, anchor, n, window, seeds[a:b]),
                        R, workers)
    err = 0.0 if spec.finite_range is not None else spec.envelope()(window)
    return PathEnsemble(np.vstack(parts), int(master_seed), seeds, anchor, window,
                        spec.alphabet, err)


def replica_word_counts(ensemble: PathEnsemble, m: int, burn_in: int) -> np.ndarray:
    """Counts of length-``m`` words of ``x^(t)``, ``burn_in < t <= n``, per replica.

    Words reaching past ``x_{-1}`` continue into the anchor.
    """
    n = ensemble.length
    if burn_in < 0 or n - burn_in < m:
        raise ConfigError(f"depth {m} exceeds usable path length {n} - burn_in {burn_in}")
    S = ensemble.alphabet.size
    size = table_size(ensemble.alphabet, m)
    tail = anchor_symbols(ensemble.anchor, 0, m)
    out = np.empty((ensemble.replicas, size), dtype=np.int64)
    npos = n - burn_in
    for a, b in _blocks(ensemble.replicas, BLOCK):
        ext = np.hstack([ensemble.paths[a:b, ::-1].astype(np.int64),
                         np.broadcast_to(tail, (b - a, m))])
        # x^(t) starts at column n - t; t = burn_in + 1 .. n
        idx = np.zeros((b - a, npos), dtype=np.int64)
        for i in range(m):
            idx = idx * S + ext[:, i: i + npos]
        offsets = np.arange(b - a)[:, None] * size
        out[a:b] = np.bincount((idx + offsets).ravel(), minlength=(b - a) * size).reshape(b - a, size)
    return out


def empirical_measure(ensemble: PathEnsemble, m: int, burn_in: int) -> MeasureVector:
    counts = replica_word_counts(ensemble, m, burn_in).sum(axis=0)
    return MeasureVector(ensemble.alphabet, m, counts / counts.sum(), counts)


def ergodic_average(f: CylinderFunction, ensemble: PathEnsemble,
                    burn_in: int) -> tuple[float, float]:
    """Time-and-replica mean of ``f(x^(t))`` and its standard error.

    The standard error comes from the spread of the per-replica means.
    """
    if f.osc == 0.0:
        return float(f.values[0]), 0.0
    counts = replica_word_counts(ensemble, f.range, burn_in)
    means = (counts @ f.values) / counts.sum(axis=1)
    R = len(means)
    se = float(means.std(ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    return float(means.mean()), se
