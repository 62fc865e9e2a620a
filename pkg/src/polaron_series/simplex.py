"""Simplex integration: Dirichlet sampling, conical product rules, and the exact
time-ordered integral of exponentials (divided differences).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, special


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream labelled by ``key``.

    Streams depend only on (seed, key), never on scheduling order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def simplex_volume(dim: int, t: float) -> float:
    """Lebesgue volume t^dim / dim! of {t_0..t_dim >= 0, sum = t}."""
    return t**dim / math.factorial(dim)


@dataclass
class SimplexSample:
    """Points on the simplex of total ``t`` with integration weights.

    ``sum(weights * f(points)) / len(points)`` is an unbiased estimate of the
    simplex integral of f.
    """

    points: np.ndarray  # (count, dim + 1)
    weights: np.ndarray  # (count,)


def unit_simplex_draws(rng: np.random.Generator, dim: int, count: int, concentration: float = 1.0):
    """Dirichlet(concentration) draws on the unit simplex plus importance weights.

    Weights are (uniform density)^-1 ratios so that mean(w f(p)) estimates the
    integral of f over the unit simplex; concentration 1 gives the uniform law.
    """
    if dim == 0:
        return np.ones((count, 1)), np.ones(count)
    if concentration == 1.0:
        e = rng.standard_exponential((count, dim + 1))
        p = e / e.sum(axis=1, keepdims=True)
        return p, np.full(count, 1.0 / math.factorial(dim))
    a = float(concentration)
    g = rng.standard_gamma(a, (count, dim + 1))
    p = g / g.sum(axis=1, keepdims=True)
    # Dirichlet density w.r.t. Lebesgue measure on (p_1..p_dim)
    log_norm = special.gammaln(a * (dim + 1)) - (dim + 1) * special.gammaln(a)
    with np.errstate(divide="ignore"):
        log_dens = log_norm + (a - 1.0) * np.log(p).sum(axis=1)
    return p, np.exp(-log_dens)


def simplex_samples(dim: int, t: float, count: int, seed: int, concentration: float = 1.0) -> SimplexSample:
    """Monte Carlo points on Delta_dim^t (dim + 1 coordinates summing to t)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim < 0:
        raise ValueError("dim must be >= 0")
    p, w = unit_simplex_draws(stream(seed, dim), dim, count, concentration)
    return SimplexSample(t * p, w * t**dim)


@lru_cache(maxsize=64)
def _gauss_jacobi01(order: int, a: float):
    """Nodes/weights on [0, 1] for the weight (1 - x)^a."""
    x, w = special.roots_jacobi(order, a, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (a + 1.0)


@lru_cache(maxsize=64)
def _simplex_rule(dim: int, order: int):
    if dim == 0:
        return np.ones((1, 1)), np.ones(1)
    nodes, weights = [], []
    for i in range(dim):
        x, w = _gauss_jacobi01(order, float(dim - 1 - i))
        nodes.append(x)
        weights.append(w)
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for i, w in enumerate(weights):
        shape = [1] * dim
        shape[i] = order
        wgrid = wgrid * w.reshape(shape)
    xs = [g.ravel() for g in grids]
    pts = np.empty((xs[0].size, dim + 1))
    rest = np.ones(xs[0].size)
    for i, x in enumerate(xs):
        pts[:, i + 1] = rest * x
        rest = rest * (1.0 - x)
    pts[:, 0] = rest
    return pts, wgrid.ravel()


def simplex_rule(dim: int, order: int) -> SimplexSample:
    """Conical product Gauss-Jacobi rule on the unit simplex (positive weights).

    Weights sum to the simplex volume 1/dim!; the rule is exact for polynomials
    of degree 2*order - 1.
    """
    pts, w = _simplex_rule(dim, order)
    return SimplexSample(pts.copy(), w * len(w))  # mean(w f) convention


def exp_simplex_integral(nodes, t: float) -> float:
    """int over Delta_n^t of exp(-sum_j t_j b_j), b = ``nodes`` (length n+1).

    Equals (-1)^n times the divided difference of x -> exp(-t x) on the nodes,
    evaluated as a corner entry of the exponential of a bidiagonal matrix
    (stable for repeated or clustered nodes).
    """
    b = np.asarray(nodes, dtype=float)
    return float(exp_simplex_integral_batch(b[None, :], t)[0])


def exp_simplex_integral_batch(nodes, t):
    """Vectorised ``exp_simplex_integral`` over the leading axis of ``nodes``."""
    b = np.atleast_2d(np.asarray(nodes, dtype=float))
    k = b.shape[-1]
    shift = b.min(axis=-1)
    if k == 1:
        return np.exp(-t * b[:, 0])
    M = np.zeros(b.shape[:-1] + (k, k))
    idx = np.arange(k)
    M[..., idx, idx] = -(b - shift[:, None]) * t
    M[..., idx[:-1], idx[1:]] = t
    E = linalg.expm(M)
    return E[..., 0, k - 1] * np.exp(-t * shift)
