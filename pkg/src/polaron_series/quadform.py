"""Rotation-invariant quadratic forms Q(P, k_1..k_n) = sum_ij Q_ij k_i . k_j.

For a pairing and a time vector t_0..t_2n,

    sum_j t_j E^{(pi,j)}_P(k) = Q(P, k) + sum_m s_m omega(k_m),

and the Gaussian integral over k reduces, one Schur complement at a time, to
c * exp(-lambda |P|^2). Combined with the Bernstein mixtures of ``model``
this turns each momentum integral into a positive mixture of exp(-lambda |P|^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrabilityError, SingularEliminationError
from .model import GaussianMixture, ModelSpec, coupling_nodes, subordination_nodes
from .pairings import CrossingTable

DEFAULT_COUPLING_ORDER = 16
DEFAULT_DISPERSION_ORDER = 48


@dataclass(frozen=True)
class QuadraticForm:
    entries: np.ndarray  # (n+1, n+1); index 0 carries P
    omega_weights: np.ndarray  # (n,)

    def __post_init__(self):
        q = np.asarray(self.entries, dtype=float)
        s = np.asarray(self.omega_weights, dtype=float).reshape(-1)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("entries must be a square matrix")
        if s.shape[0] != q.shape[0] - 1:
            raise ValueError("need one omega weight per momentum variable")
        object.__setattr__(self, "entries", q)
        object.__setattr__(self, "omega_weights", s)

    @property
    def n(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def momentum_block(self) -> np.ndarray:
        return self.entries[1:, 1:]

    def __call__(self, P, k) -> float:
        P = np.atleast_1d(np.asarray(P, dtype=float))
        k = np.asarray(k, dtype=float).reshape(self.n, P.size)
        X = np.vstack([P[None, :], k])
        return float(np.einsum("ij,ia,ja->", self.entries, X, X))


@dataclass(frozen=True)
class ReducedGaussian:
    """int exp(-Q(P, k)) dk = amplitude * exp(-exponent |P|^2)."""

    amplitude: float
    exponent: float
    log_amplitude: float

    def __call__(self, u):
        return self.amplitude * np.exp(-self.exponent * np.asarray(u, dtype=float))


def _as_vectors(P, k, n):
    P = np.atleast_1d(np.asarray(P, dtype=float))
    k = np.asarray(k, dtype=float)
    if n == 0:
        return P, k.reshape(0, P.shape[0])
    k = k.reshape(n, -1) if k.ndim < 2 else k
    if k.shape != (n, P.shape[0]):
        raise ValueError(f"expected {n} momenta of dimension {P.shape[0]}, got shape {k.shape}")
    return P, k


def crossing_energy(table: CrossingTable, j: int, P, k, m: ModelSpec) -> float:
    """|P - sum_{l in M_j} k_l|^2 + sum_{l in M_j} omega(k_l)."""
    if not 0 <= j <= 2 * table.n:
        raise ValueError(f"j must lie in 0..{2 * table.n}")
    P, k = _as_vectors(P, k, table.n)
    if P.shape[0] != m.d:
        raise ValueError(f"P has dimension {P.shape[0]}, model has d={m.d}")
    members = sorted(table.sets[j])
    if not members:
        return float(P @ P)
    ks = k[[i - 1 for i in members]]
    q = P - ks.sum(axis=0)
    return float(q @ q + np.sum(m.omega(np.linalg.norm(ks, axis=1))))


def _design(table: CrossingTable) -> np.ndarray:
    """Rows e_0 - sum_{m in M_j} e_m, shape (2n+1, n+1)."""
    U = np.zeros((2 * table.n + 1, table.n + 1))
    U[:, 0] = 1.0
    U[:, 1:] = -table.membership()
    return U


def assemble_batch(table: CrossingTable, times):
    """Vectorised assembly: times (B, L) with L = 2n+1 (or 2n, padded with 0).

    Returns Q (B, n+1, n+1) and s (B, n).
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    L = 2 * table.n + 1
    if times.shape[1] == L - 1:
        times = np.concatenate([times, np.zeros((times.shape[0], 1))], axis=1)
    if times.shape[1] != L:
        raise ValueError(f"expected {L} (or {L - 1}) time coordinates, got {times.shape[1]}")
    U = _design(table)
    Q = np.einsum("jk,bj,jl->bkl", U, times, U)
    s = times @ table.membership()
    return Q, s


def assemble_quadratic_form(table: CrossingTable, times) -> QuadraticForm:
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    Q, s = assemble_batch(table, times[None, :])
    return QuadraticForm(Q[0], s[0])


def schur_eliminate(q: QuadraticForm, index: int | None = None) -> QuadraticForm:
    """Minimise the form over k_index (default: the last variable)."""
    n = q.n
    idx = n if index is None else int(index)
    if not 1 <= idx <= n:
        raise ValueError(f"can only eliminate momentum variables 1..{n}")
    Q = q.entries
    piv = Q[idx, idx]
    if not piv > 0:
        raise SingularEliminationError(f"pivot Q[{idx},{idx}] = {piv} vanishes; k_{idx} is never crossed", step=idx)
    keep = [i for i in range(n + 1) if i != idx]
    col = Q[keep, idx]
    Qp = Q[np.ix_(keep, keep)] - np.outer(col, col) / piv
    s = np.delete(q.omega_weights, idx - 1)
    return QuadraticForm((Qp + Qp.T) / 2, s)


def gaussian_integral(q: QuadraticForm, d: int, order=None) -> ReducedGaussian:
    """int_{R^{dn}} exp(-Q(P, k)) dk = c exp(-lambda |P|^2) by iterated elimination.

    ``order`` lists the variables (1-based, original labels) in elimination
    order; default is k_n, k_{n-1}, ..., k_1.
    """
    order = list(range(q.n, 0, -1)) if order is None else list(order)
    if sorted(order) != list(range(1, q.n + 1)):
        raise ValueError("order must be a permutation of 1..n")
    labels = list(range(q.n + 1))
    log_c = 0.0
    cur = q
    for step, var in enumerate(order, 1):
        pos = labels.index(var)
        piv = cur.entries[pos, pos]
        if not piv > 0:
            raise SingularEliminationError(
                f"singular momentum block: pivot for k_{var} vanishes at elimination step {step}", step=step)
        log_c += 0.5 * d * math.log(math.pi / piv)
        cur = schur_eliminate(cur, pos)
        labels.pop(pos)
    lam = float(cur.entries[0, 0])
    return ReducedGaussian(math.exp(log_c), lam, log_c)


def _eliminate_last(Q):
    m = Q.shape[-1] - 1
    piv = Q[:, m, m]
    col = Q[:, :m, m]
    return Q[:, :m, :m] - col[:, :, None] * col[:, None, :] / piv[:, None, None], piv


def reduce_batch(Q, d):
    """Vectorised ``gaussian_integral``: returns (log c, lambda) per form."""
    Q = np.array(Q, dtype=float)
    logc = np.zeros(Q.shape[0])
    while Q.shape[-1] > 1:
        Q, piv = _eliminate_last(Q)
        if np.any(piv <= 0):
            raise SingularEliminationError("singular momentum block in batch")
        logc += 0.5 * d * np.log(np.pi / piv)
    return logc, Q[:, 0, 0]


def _expand(arrays, k):
    return [np.repeat(a, k, axis=0) for a in arrays]


def mixture_batch(Q, s, m: ModelSpec, coupling_order=DEFAULT_COUPLING_ORDER,
                  dispersion_order=DEFAULT_DISPERSION_ORDER):
    """Positive exponential mixtures for a batch of momentum integrals.

    Returns (log_weights, lambdas), both (B, K), such that

        int exp(-Q(P,k) - sum_m s_m omega(k_m)) prod_m |v(k_m)|^2 / g^2 dk
            = sum_K exp(log_weights) exp(-lambdas |P|^2).

    The g^{2n} prefactor is left to the caller so coupling rescalings stay exact.
    """
    Q = np.array(Q, dtype=float)
    s = np.array(s, dtype=float)
    B, n = s.shape
    if n == 0:
        return np.zeros((B, 1)), Q[:, 0, 0][:, None]
    d = m.d
    idx = np.arange(1, n + 1)
    Q[:, idx, idx] += m.cutoff_rate
    logw = np.zeros(B)
    if m.dispersion == "constant":
        logw -= s.sum(axis=1)
    for var in range(n, 0, -1):
        if m.dispersion != "constant":
            w_d, tau = subordination_nodes(s[:, var - 1], dispersion_order, d=d,
                                           gaussian_rate=Q[:, var, var], mass=m.effective_mass)
            kd = w_d.shape[1]
            Q, s, logw = _expand([Q, s, logw], kd)
            Q[:, var, var] += tau.ravel()
            with np.errstate(divide="ignore"):
                logw = logw + np.log(w_d.ravel())
        if m.beta > 0:
            piv = Q[:, var, var]
            if np.any(piv <= 0):
                raise IntegrabilityError(
                    f"k_{var} has zero exposure and no cutoff; the momentum integral diverges "
                    "outside the Lieb-Yamazaki integrability regime")
            # marginal precision of k_var within the current momentum block
            A = Q[:, 1:, 1:]
            scale = 1.0 / np.linalg.inv(A)[:, var - 1, var - 1]
            w_c, x_c = coupling_nodes(m.beta, d, coupling_order, 1.0)
            kc = w_c.size
            Q, s, logw, scale = _expand([Q, s, logw, scale], kc)
            Q[:, var, var] += scale * np.tile(x_c, len(scale) // kc)
            logw = logw + np.tile(np.log(w_c), len(scale) // kc) + m.beta * np.log(scale)
        piv = Q[:, var, var]
        if np.any(piv <= 0):
            raise IntegrabilityError(
                f"k_{var} has zero exposure and no cutoff; the momentum integral diverges "
                "outside the Lieb-Yamazaki integrability regime")
        logw = logw + 0.5 * d * np.log(np.pi / piv)
        Q, _ = _eliminate_last(Q)
    lam = np.maximum(Q[:, 0, 0], 0.0)
    return logw.reshape(B, -1), lam.reshape(B, -1)


def momentum_integral(table: CrossingTable, times, m: ModelSpec, quad_orders=None,
                      prune=1e-14) -> GaussianMixture:
    """Mixture {(w_i, lambda_i)} with  int e^{-sum t_j E_j} prod |v|^2 dk = sum w_i e^{-lambda_i |P|^2}.

    Nodes whose weight is below ``prune`` times the total weight are dropped.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    co, do = quad_orders or (DEFAULT_COUPLING_ORDER, DEFAULT_DISPERSION_ORDER)
    if m.g == 0:
        return GaussianMixture(np.zeros(0), np.zeros(0), exact=True)
    Q, s = assemble_batch(table, times[None, :])
    logw, lam = mixture_batch(Q, s, m, co, do)
    w = m.g2 ** table.n * np.exp(logw[0])
    keep = w > prune * w.sum()
    exact = m.beta == 0 and m.dispersion == "constant"
    return GaussianMixture(w[keep], lam[0][keep], exact=exact)
