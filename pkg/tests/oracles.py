"""Slow, independent reference computations used to check the library.

Nothing here imports the code paths it checks: points are plain tuples,
functions are Python callables, and sums are done term by term.
"""
import itertools
import math

import numpy as np


def words(S, d):
    return list(itertools.product(range(S), repeat=d))


def variation_all_pairs(f, S, m, n):
    """max |f(x) - f(y)| over all pairs agreeing in the first n coordinates."""
    best = 0.0
    W = words(S, m)
    for x in W:
        for y in W:
            if x[:n] == y[:n]:
                best = max(best, abs(f[x] - f[y]))
    return best


def power_sum(alpha, start, N=200_000):
    """sum_{n>=start} n^-alpha: direct terms up to N, then a midpoint-integral tail.

    Returns (estimate, lower, upper) where lower/upper are integral brackets.
    """
    head = math.fsum(n**-alpha for n in range(start, N + 1))
    lower = head + (N + 1) ** (1 - alpha) / (alpha - 1)
    upper = head + N ** (1 - alpha) / (alpha - 1)
    mid = head + (N + 0.5) ** (1 - alpha) / (alpha - 1)
    return mid, lower, upper


def long_range_g(alpha, c, point, tail_sign, sign=(1.0, -1.0)):
    """g at point = (x_0, ..., x_L) followed by a constant tail with sign tail_sign."""
    s, ctx = point[0], point[1:]
    h = math.fsum(c * n**-alpha * sign[x] for n, x in enumerate(ctx, start=1))
    if tail_sign:
        h += tail_sign * c * power_sum(alpha, len(ctx) + 1)[0]
    return 0.5 + sign[s] * h


def transfer_brute(g, k, f, m, S, x):
    """(L f)(x) = sum_s g(s.x) f(s.x) with g, f as dicts on tuples; x a long enough tuple."""
    total = 0.0
    for s in range(S):
        y = (s,) + tuple(x)
        total += g[y[:k]] * f[y[:m]]
    return total


def stationary_direct(P):
    """Solve pi P = pi, sum(pi) = 1 by least squares on the balance equations."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def prepend_chain_matrix(g, k, S):
    """Transition matrix of the state (x_0..x_{k-2}) under prepending, from a dict g."""
    states = words(S, k - 1)
    index = {u: i for i, u in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for u in states:
        for s in range(S):
            v = ((s,) + u)[: k - 1]
            P[index[u], index[v]] += g[(s,) + u]
    return states, P


def cylinder_mass(g, k, pi, w):
    """mu[w] by expanding over all consistent stationary states of length k-1."""
    mass = pi[w[len(w) - (k - 1):]] if k > 1 else 1.0
    for j in range(len(w) - k, -1, -1):
        mass *= g[w[j:j + k]]
    return mass
