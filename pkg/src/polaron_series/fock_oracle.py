"""Truncated-Fock brute force for <Omega| exp(-t H(P)) Omega> over discrete modes.

H(P) = |P - sum_i kappa_i n_i|^2 + sum_i omega_i n_i + sum_i (g_i a_i + conj(g_i) a_i^dagger)
on occupation vectors with total boson number <= N_max.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import SizeLimitError
from .model import ModelSpec

BASIS_CAP = 20_000


@dataclass(frozen=True)
class DiscreteModes:
    momenta: np.ndarray  # (M, d)
    frequencies: np.ndarray  # (M,)
    amplitudes: np.ndarray  # (M,)
    provenance: str = ""

    def __post_init__(self):
        k = np.asarray(self.momenta, dtype=float)
        k = k.reshape(len(k), -1) if k.size else k.reshape(0, 1)
        w = np.asarray(self.frequencies, dtype=float).reshape(-1)
        g = np.asarray(self.amplitudes).reshape(-1)
        if not (len(k) == w.size == g.size):
            raise ValueError("momenta, frequencies and amplitudes must have one entry per mode")
        if np.any(w <= 0):
            raise ValueError("mode frequencies must be positive")
        object.__setattr__(self, "momenta", k)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "amplitudes", g)

    @property
    def count(self):
        return self.frequencies.size

    @property
    def d(self):
        return self.momenta.shape[1]

    def with_coupling_scale(self, factor):
        return DiscreteModes(self.momenta, self.frequencies, self.amplitudes * factor, self.provenance)


def single_mode(kappa=1.0, omega=1.0, g=0.1, d=1) -> DiscreteModes:
    k = np.zeros((1, d))
    k[0, 0] = kappa
    return DiscreteModes(k, [omega], [g], provenance="single-mode")


def grid_modes(m: ModelSpec, K: int, h: float) -> DiscreteModes:
    """d = 1 grid kappa in {-K h, ..., K h}; g_i = v(kappa_i) sqrt(h).

    The kappa = 0 mode is dropped when the coupling is singular there.
    """
    if m.d != 1:
        raise ValueError("grid discretisation is only provided for d = 1")
    ks = h * np.arange(-K, K + 1)
    if m.beta > 0:
        ks = ks[ks != 0]
    r = np.abs(ks)
    g = np.sqrt(np.asarray(m.v2(r), dtype=float) * h)
    return DiscreteModes(ks[:, None], np.asarray(m.omega(r), dtype=float) * np.ones_like(r), g,
                         provenance=f"d=1 grid K={K} h={h}")


@dataclass(frozen=True)
class FockTruncation:
    n_max: int
    basis: tuple  # occupation tuples, vacuum first

    @property
    def size(self):
        return len(self.basis)


def basis_size(modes: int, n_max: int) -> int:
    return math.comb(modes + n_max, n_max)


def fock_truncation(modes: int, n_max: int, cap: int = BASIS_CAP) -> FockTruncation:
    """All occupation vectors over ``modes`` modes with total <= n_max."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    size = basis_size(modes, n_max)
    if size > cap:
        raise SizeLimitError(f"Fock basis of {size} states exceeds cap {cap}")
    if modes == 0:
        return FockTruncation(n_max, ((),))
    basis = []
    for total in range(n_max + 1):
        # stars and bars: choose positions of modes-1 bars among total+modes-1 slots
        for bars in combinations(range(total + modes - 1), modes - 1):
            occ, prev = [], -1
            for b in bars:
                occ.append(b - prev - 1)
                prev = b
            occ.append(total + modes - 1 - prev - 1)
            basis.append(tuple(occ))
    return FockTruncation(n_max, tuple(basis))


def build_hamiltonian(modes: DiscreteModes, trunc: FockTruncation, P) -> np.ndarray:
    """Dense real symmetric H(P) on the truncated basis."""
    P = np.atleast_1d(np.asarray(P, dtype=float))
    if modes.count and P.size != modes.d:
        raise ValueError(f"P has dimension {P.size}, modes have d={modes.d}")
    if np.any(np.abs(np.imag(modes.amplitudes)) > 0):
        raise ValueError("complex amplitudes are not supported; use |g_i|")
    g = np.real(modes.amplitudes).astype(float)
    N = trunc.size
    H = np.zeros((N, N))
    index = {occ: i for i, occ in enumerate(trunc.basis)}
    for i, occ in enumerate(trunc.basis):
        n = np.asarray(occ, dtype=float)
        q = P - (n @ modes.momenta if modes.count else 0.0)
        H[i, i] = float(q @ q) + float(n @ modes.frequencies) if modes.count else float(P @ P)
        for mode in range(modes.count):
            up = list(occ)
            up[mode] += 1
            j = index.get(tuple(up))
            if j is not None:
                amp = g[mode] * math.sqrt(occ[mode] + 1)
                H[i, j] = H[j, i] = amp
    return H


def vacuum_heat(H, t) -> float:
    """<Omega| exp(-tH) Omega> with Omega the first basis state."""
    if t < 0:
        raise ValueError("t must be >= 0")
    E, V = np.linalg.eigh(H)
    return float(np.sum(V[0] ** 2 * np.exp(-t * (E - E[0]))) * math.exp(-t * E[0]))


def vacuum_heat_curve(H, ts):
    E, V = np.linalg.eigh(H)
    ts = np.asarray(ts, dtype=float)
    return np.exp(-np.multiply.outer(ts, E)) @ V[0] ** 2


@dataclass
class OracleMatch:
    u: float
    t: float
    series: float
    oracle: float
    difference: float
    truncation_estimate: float  # from the first omitted order
    fock_estimate: float  # |oracle(N_max) - oracle(N_max + 1)|
    mc_error: float
    budget: float
    passed: bool


def oracle_series_match(modes: DiscreteModes, trunc: FockTruncation, u, t, nmax, settings=None,
                        truncation_factor=2.0) -> OracleMatch:
    """Compare the mode-sum series with the truncated-Fock value at P = sqrt(u) e_1."""
    from .series import build_bank, SeriesSettings

    settings = settings or SeriesSettings()
    P = np.zeros(modes.d)
    P[0] = math.sqrt(u)
    oracle = vacuum_heat(build_hamiltonian(modes, trunc, P), t)
    bigger = fock_truncation(modes.count, trunc.n_max + 1, cap=10 * BASIS_CAP)
    oracle_up = vacuum_heat(build_hamiltonian(modes, bigger, P), t)
    bank = build_bank(modes, [t], [u], nmax + 1, settings)
    series = float(bank.total(nmax)[0, 0])
    next_term = float(bank.contribution(nmax + 1)[0, 0])
    diff = abs(series - oracle)
    fock = abs(oracle - oracle_up)
    budget = truncation_factor * abs(next_term) + fock + 1e-14 * max(1.0, abs(oracle))
    return OracleMatch(float(u), float(t), series, oracle, diff, truncation_factor * abs(next_term),
                       fock, 0.0, budget, diff <= budget)
