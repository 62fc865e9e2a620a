"""Diagrammatic expansion of F_t(P) = <Omega| exp(-t H(P)) Omega>.

    F_t(P) = e^{-t|P|^2} + sum_{n>=1} sum_{pi in W_2n} int_{Delta_2n^t} int e^{-sum_j t_j E_j} prod |v|^2,

its renewal kernel (interlacing pairings on Delta_{2n-1}^s), the long-time
energy E0(P) and the monotonicity/concavity verdicts.

Every simplex point is turned into a positive mixture sum_i w_i e^{-lambda_i u}
in u = |P|^2. The same unit-simplex points are reused for every u and every t
(common random numbers), so differences in u or t are estimated with strongly
correlated errors and the estimated F is itself a positive exponential mixture
in u. Standard errors of derived quantities use the per-sample linear
functionals of a ``SampleBank``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .curves import EnergyCurve, HeatCurve
from .errors import IntegrabilityError, TruncationError
from .model import ModelSpec, check_assumption1
from .pairings import DEFAULT_PAIRING_CAP, crossing_table, enumerate_pairings, is_interlacing
from .quadform import DEFAULT_COUPLING_ORDER, DEFAULT_DISPERSION_ORDER, assemble_batch, mixture_batch
from .simplex import exp_simplex_integral_batch, simplex_samples, stream, unit_simplex_draws

DEFAULT_NMAX = 3
NMAX_CAP = 5
_ROWS_PER_CHUNK = 200_000


@dataclass(frozen=True)
class SeriesSettings:
    """Numerical knobs shared by every series evaluation."""

    mc_count: int = 4000
    seed: int = 0
    concentration: float = 1.0  # Dirichlet parameter of the simplex sampler
    coupling_order: int = DEFAULT_COUPLING_ORDER
    dispersion_order: int = DEFAULT_DISPERSION_ORDER
    rule_order: int = 48  # Gauss-Legendre nodes for the one-dimensional n = 1 integrals
    threads: int = 1
    cap: int = NMAX_CAP

    def __post_init__(self):
        if self.mc_count < 1:
            raise ValueError("mc_count must be >= 1")
        if not self.concentration > 0:
            raise ValueError("concentration must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class SeriesEstimate:
    value: float
    std_error: float
    per_order: list  # (n, contribution, std_error)
    truncation_order: int
    truncation_hint: float


# ---------------------------------------------------------------------------
# sample banks


@dataclass
class PairingBank:
    """Per-sample estimates for one pairing; shape (samples, nt, nu).

    The contribution is ``values.mean(0)``. Deterministic banks (quadrature
    rules, discrete-mode sums) carry no statistical error.
    """

    values: np.ndarray
    deterministic: bool

    def mean(self):
        return self.values.mean(axis=0)

    def variance_of(self, coef):
        """Variance of the mean of sum(coef * sample) over (nt, nu)."""
        if self.deterministic or self.values.shape[0] < 2:
            return 0.0
        lin = np.tensordot(self.values, coef, axes=([1, 2], [0, 1]))
        return float(np.var(lin, ddof=1) / lin.size)


@dataclass
class SampleBank:
    """Banks for orders 1..nmax (``orders[n]`` lists one PairingBank per pairing)."""

    ts: np.ndarray
    us: np.ndarray
    orders: dict = field(default_factory=dict)
    kernel: bool = False

    @property
    def nmax(self):
        return max(self.orders, default=0)

    def contribution(self, n):
        banks = self.orders.get(n, [])
        if not banks:
            return np.zeros((self.ts.size, self.us.size))
        return sum(b.mean() for b in banks)

    def variance(self, n, coef):
        return sum(b.variance_of(coef) for b in self.orders.get(n, []))

    def std_error(self, n):
        """Pointwise standard errors of order n, shape (nt, nu)."""
        out = np.zeros((self.ts.size, self.us.size))
        for b in self.orders.get(n, []):
            if not b.deterministic and b.values.shape[0] > 1:
                out += b.values.var(axis=0, ddof=1) / b.values.shape[0]
        return np.sqrt(out)

    def free(self):
        if self.kernel:
            return np.zeros((self.ts.size, self.us.size))
        return np.exp(-np.multiply.outer(self.ts, self.us))

    def total(self, upto=None):
        upto = self.nmax if upto is None else upto
        return self.free() + sum((self.contribution(n) for n in range(1, upto + 1)),
                                 np.zeros((self.ts.size, self.us.size)))

    def total_variance(self, coef, upto=None):
        upto = self.nmax if upto is None else upto
        return sum(self.variance(n, coef) for n in range(1, upto + 1))


# ---------------------------------------------------------------------------
# continuum measure


def _check_integrable(m: ModelSpec):
    if m.g == 0:
        return
    rep = check_assumption1(m, 1.0)
    if not rep.feasible:
        raise IntegrabilityError(
            f"model violates the Lieb-Yamazaki integrability condition ({rep.divergent} diverges); "
            "the diagram integrals are infinite")


def _fast_scaling(m: ModelSpec) -> bool:
    # without cutoff and with omega = 1 the mixture at t p follows from the one at p
    return m.dispersion == "constant" and m.cutoff == "none"


def _unit_points(n, kernel, settings: SeriesSettings, pairing_index):
    """Unit-simplex points (count, L) with L = 2n+1 (2n+1 padded for the kernel)."""
    dim = 2 * n - 1 if kernel else 2 * n
    if n == 1:
        x, w = special.roots_legendre(settings.rule_order)
        x = (x + 1) / 2
        w = w / 2
        t1 = x**2
        jac = 2 * x * w
        if kernel:
            p = np.stack([1 - t1, t1, np.zeros_like(t1)], axis=1)
            wt = jac
        else:
            p = np.stack([(1 - t1) / 2, t1, (1 - t1) / 2], axis=1)
            wt = jac * (1 - t1)
        return p, wt * len(wt), dim, True
    rng = stream(settings.seed, n, pairing_index, int(kernel))
    p, w = unit_simplex_draws(rng, dim, settings.mc_count, settings.concentration)
    if kernel:
        p = np.concatenate([p, np.zeros((p.shape[0], 1))], axis=1)
    return p, w, dim, False


def _mixture_chunks(table, times, m, settings):
    """Yield (row slice, log weights, rates) for the mixture at each row of ``times``."""
    n = table.n
    nodes = 1
    if m.beta > 0:
        nodes *= settings.coupling_order
    if m.dispersion != "constant":
        nodes *= settings.dispersion_order
    rows_per = max(1, _ROWS_PER_CHUNK // nodes**n)
    for lo in range(0, times.shape[0], rows_per):
        sl = slice(lo, lo + rows_per)
        Q, s = assemble_batch(table, times[sl])
        logw, lam = mixture_batch(Q, s, m, settings.coupling_order, settings.dispersion_order)
        yield sl, logw, lam


def _pairing_bank_continuum(table, m: ModelSpec, ts, us, kernel, settings, pairing_index):
    n = table.n
    p, w, dim, det = _unit_points(n, kernel, settings, pairing_index)
    out = np.zeros((p.shape[0], ts.size, us.size))
    g2n = m.g2**n
    if _fast_scaling(m):
        # Q(t p) = t Q(p): weights pick up t^{(beta - d/2) n} e^{-t S}, rates scale by t
        for sl, logw, lam in _mixture_chunks(table, p, m, settings):
            S = assemble_batch(table, p[sl])[1].sum(axis=1)
            logw = logw + S[:, None]  # undo e^{-S}; reapplied per t below
            for a, t in enumerate(ts):
                shift = (m.beta - m.d / 2) * n * math.log(t) - t * S
                lw = logw + shift[:, None]
                expo = lw[:, :, None] - t * lam[:, :, None] * us[None, None, :]
                out[sl, a, :] = np.exp(expo).sum(axis=1)
    else:
        for a, t in enumerate(ts):
            for sl, logw, lam in _mixture_chunks(table, t * p, m, settings):
                expo = logw[:, :, None] - lam[:, :, None] * us[None, None, :]
                out[sl, a, :] = np.exp(expo).sum(axis=1)
    scale = np.outer(w, ts**dim)
    out *= (g2n * scale)[:, :, None]
    return PairingBank(out, det)


# ---------------------------------------------------------------------------
# discrete-mode measure (sums over modes replace the momentum integrals)


def _pairing_bank_discrete(table, modes, ts, us, kernel):
    n = table.n
    M = len(modes.frequencies)
    kappa = np.asarray(modes.momenta, dtype=float).reshape(M, -1)
    omega = np.asarray(modes.frequencies, dtype=float)
    g2 = np.abs(np.asarray(modes.amplitudes)) ** 2
    assign = np.array(np.meshgrid(*[np.arange(M)] * n, indexing="ij")).reshape(n, -1).T
    memb = table.membership()  # (2n+1, n)
    if kernel:
        memb = memb[:-1]
    K = np.einsum("jm,amd->ajd", memb, kappa[assign])  # (A, L, d)
    W = memb @ omega[assign].T  # (L, A)
    weight = np.prod(g2[assign], axis=1)  # (A,)
    P = np.zeros((us.size, kappa.shape[1]))
    P[:, 0] = np.sqrt(us)
    diff = P[:, None, None, :] - K[None, :, :, :]  # (nu, A, L, d)
    b = np.einsum("uald,uald->ual", diff, diff) + W.T[None, :, :]
    out = np.zeros((1, ts.size, us.size))
    flat = b.reshape(-1, b.shape[-1])
    for a, t in enumerate(ts):
        vals = exp_simplex_integral_batch(flat, t).reshape(us.size, -1)
        out[0, a, :] = vals @ weight
    return PairingBank(out, True)


def _is_discrete(measure):
    return not isinstance(measure, ModelSpec)


def _coupling_is_zero(measure):
    if _is_discrete(measure):
        return not np.any(np.abs(np.asarray(measure.amplitudes)) > 0)
    return measure.g == 0


# ---------------------------------------------------------------------------
# bank construction


def _pairing_list(n, kernel, cap):
    ps = enumerate_pairings(n, cap=max(cap, n))
    if kernel:
        ps = [p for p in ps if is_interlacing(p)]
    return ps


def build_bank(measure, ts, us, nmax, settings: SeriesSettings | None = None, kernel=False,
               orders=None) -> SampleBank:
    """Evaluate per-pairing sample banks for orders 1..nmax on the (t, u) grid.

    ``measure`` is a ModelSpec (continuum) or a DiscreteModes instance.
    """
    settings = settings or SeriesSettings()
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    us = np.atleast_1d(np.asarray(us, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("times must be positive")
    if np.any(us < 0):
        raise ValueError("u = |P|^2 must be nonnegative")
    if nmax > settings.cap:
        raise ValueError(f"nmax={nmax} exceeds the series cap {settings.cap}")
    bank = SampleBank(ts, us, kernel=kernel)
    if _coupling_is_zero(measure):
        return bank
    if not _is_discrete(measure):
        _check_integrable(measure)
    for n in orders or range(1, nmax + 1):
        pairs = _pairing_list(n, kernel, settings.cap)
        tables = [crossing_table(p) for p in pairs]

        def job(item, n=n):
            idx, tab = item
            if _is_discrete(measure):
                return _pairing_bank_discrete(tab, measure, ts, us, kernel)
            return _pairing_bank_continuum(tab, measure, ts, us, kernel, settings, idx)

        items = list(enumerate(tables))
        if settings.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(settings.threads) as pool:
                bank.orders[n] = list(pool.map(job, items))
        else:
            bank.orders[n] = [job(it) for it in items]
    return bank


def _settings(settings, mc_count, seed, **kw):
    settings = settings or SeriesSettings()
    upd = {k: v for k, v in dict(mc_count=mc_count, seed=seed, **kw).items() if v is not None}
    return replace(settings, **upd)


# ---------------------------------------------------------------------------
# public operations


def order_contribution(n, m, u, t, mc_count=None, seed=None, settings=None):
    """Order-n term summed over all pairings of W_2n: (value, std_error)."""
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, [t], [u], n, st, orders=[n])
    return float(bank.contribution(n)[0, 0]), float(bank.std_error(n)[0, 0])


def _estimate_from_bank(bank, ia=0, iu=0):
    per = []
    for n in range(1, bank.nmax + 1):
        per.append((n, float(bank.contribution(n)[ia, iu]), float(bank.std_error(n)[ia, iu])))
    value = float(bank.total()[ia, iu])
    var = sum(e**2 for _, _, e in per)
    hint = abs(per[-1][1]) if per else 0.0
    return SeriesEstimate(value, math.sqrt(var), per, bank.nmax, hint)


def heat_value(m, u, t, nmax=DEFAULT_NMAX, mc_count=None, seed=None, settings=None) -> SeriesEstimate:
    """Truncated series for F_t at |P|^2 = u."""
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, [t], [u], nmax, st)
    return _estimate_from_bank(bank)


def heat_curve(m, u_grid, t, nmax=DEFAULT_NMAX, mc_count=None, seed=None, settings=None) -> HeatCurve:
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, [t], u_grid, nmax, st)
    var = sum((bank.std_error(n) ** 2 for n in range(1, bank.nmax + 1)), np.zeros((1, bank.us.size)))
    return HeatCurve(t, bank.us, bank.total()[0], np.sqrt(var[0]))


def renewal_kernel(m, u, s, nmax=DEFAULT_NMAX, mc_count=None, seed=None, settings=None) -> SeriesEstimate:
    """Kernel of the renewal equation: interlacing pairings on Delta_{2n-1}^s."""
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, [s], [u], nmax, st, kernel=True)
    return _estimate_from_bank(bank)


# ---------------------------------------------------------------------------
# renewal equation


@dataclass
class RenewalReport:
    residual: float  # |F_N - e - sum_{a+b<=N} F^(a) * K^(b)|, zero in expectation
    full_residual: float  # |F_N - e - F_N * K_N|
    truncation_terms: float  # |sum_{a+b>N} F^(a) * K^(b)|, the O(g^{2(N+1)}) part of the full residual
    mc_error: float
    quadrature_error: float
    budget: float
    richardson_residual: float  # matched residual on the half grid
    passed: bool
    per_order: list


def _trapezoid_weights(count, h):
    w = np.full(count + 1, h)
    w[0] = w[-1] = h / 2
    return w


def renewal_residual(m, u, t, grid_count=64, nmax=2, mc_count=None, seed=None, settings=None,
                     sigma=3.0) -> RenewalReport:
    """Check F = e + F * K at matched truncation order on a uniform s-grid."""
    if grid_count < 8 or grid_count % 2:
        raise ValueError("grid_count must be an even integer >= 8")
    st = _settings(settings, mc_count, seed)
    s = np.linspace(0.0, t, grid_count + 1)
    h = t / grid_count
    # F at t - s (s = t gives t - s = 0, where F^(a) = 0 for a >= 1)
    tf = (t - s)[:-1]
    Fb = build_bank(m, tf, [u], nmax, st)
    Kb = build_bank(m, s[1:], [u], nmax, st, kernel=True)

    def padF(arr):  # values at t - s for all grid s
        return np.concatenate([arr[:, 0], [0.0]])

    def padK(arr):
        return np.concatenate([[0.0], arr[:, 0]])

    e_free = math.exp(-t * u)
    F = {0: np.exp(-(t - s) * u)}
    K = {}
    for a in range(1, nmax + 1):
        F[a] = padF(Fb.contribution(a))
        K[a] = padK(Kb.contribution(a))

    def conv(f, k, stride=1):
        idx = np.arange(0, grid_count + 1, stride)
        w = _trapezoid_weights(idx.size - 1, h * stride)
        return float(np.sum(w * f[idx] * k[idx]))

    def matched(stride):
        r = sum(F[a][0] for a in range(1, nmax + 1))
        for a in range(0, nmax):
            for b in range(1, nmax - a + 1):
                r -= conv(F[a], K[b], stride)
        return r

    res = matched(1)
    res_half = matched(2)
    trunc = sum(conv(F[a], K[b]) for a in range(1, nmax + 1) for b in range(1, nmax + 1) if a + b > nmax)
    full = res - trunc

    # delta-method variance: coefficients of each F^(a)(t - s_i) and K^(b)(s_i)
    w = _trapezoid_weights(grid_count, h)
    var = 0.0
    for a in range(1, nmax + 1):
        coef = np.zeros(grid_count + 1)
        coef[0] += 1.0
        for b in range(1, nmax - a + 1):
            coef -= w * K[b]
        var += Fb.variance(a, coef[:-1, None])
    for b in range(1, nmax + 1):
        coef = np.zeros(grid_count + 1)
        for a in range(0, nmax - b + 1):
            coef -= w * F[a]
        var += Kb.variance(b, coef[1:, None])
    mc = math.sqrt(var)
    quad = abs(res - res_half) / 3.0
    budget = sigma * mc + 2.0 * quad + 1e-13
    per = [(a, float(F[a][0]), float(K[a][-1])) for a in range(1, nmax + 1)]
    return RenewalReport(abs(res), abs(full), abs(trunc), mc, quad, budget, abs(res_half),
                         abs(res) <= budget, per)


# ---------------------------------------------------------------------------
# ground-state energy


def _slope_weights(ts):
    tc = ts - ts.mean()
    return tc / np.sum(tc**2)


@dataclass
class EnergyFit:
    E0: float
    fit_residual: float
    std_error: float
    truncation_ratio: float


def _energy_from_bank(bank, truncation_fraction):
    ts, us = bank.ts, bank.us
    if not any(np.any(bank.contribution(n)) for n in range(1, bank.nmax + 1)):
        # F = e^{-tu} exactly; skip the fit so E0 = u holds bit for bit
        zeros = np.zeros(us.size)
        return us.copy(), zeros, zeros, zeros, np.zeros((ts.size, us.size))
    F = bank.total()
    if np.any(F <= 0):
        raise TruncationError("truncated series produced a nonpositive F; coupling too strong for nmax")
    y = -np.log(F)
    a = _slope_weights(ts)
    E0 = a @ y
    icpt = y.mean(axis=0) - E0 * ts.mean()
    resid = np.max(np.abs(y - (icpt + np.multiply.outer(ts, E0))), axis=0)
    ratio = np.zeros(us.size)
    if bank.nmax:
        ratio = np.abs(bank.contribution(bank.nmax)[-1]) / F[-1]
    bad = np.nonzero(ratio > truncation_fraction)[0]
    if bad.size:
        i = bad[0]
        raise TruncationError(
            f"order-{bank.nmax} term is {ratio[i]:.3g} of F at t={ts[-1]}, u={us[i]} "
            f"(allowed {truncation_fraction}); shorten the t-window or raise nmax")
    # delta method: dE0 = -sum_t a_t dF_t / F_t
    grads = -(a[:, None] / F)  # (nt, nu)
    err = np.zeros(us.size)
    for i in range(us.size):
        coef = np.zeros_like(F)
        coef[:, i] = grads[:, i]
        err[i] = math.sqrt(bank.total_variance(coef))
    return E0, resid, err, ratio, grads


def ground_energy(m, u, t_window=(2.0, 6.0, 5), nmax=DEFAULT_NMAX, mc_count=None, seed=None,
                  settings=None, truncation_fraction=0.1) -> EnergyFit:
    """Least-squares slope of -ln F_t against t over the window."""
    t_min, t_max, count = t_window
    if count < 2 or not t_max > t_min > 0:
        raise ValueError("t_window needs 0 < t_min < t_max and count >= 2")
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, np.linspace(t_min, t_max, int(count)), [u], nmax, st)
    E0, resid, err, ratio, _ = _energy_from_bank(bank, truncation_fraction)
    return EnergyFit(float(E0[0]), float(resid[0]), float(err[0]), float(ratio[0]))


def energy_curve(m, u_grid, t_window=(2.0, 6.0, 5), nmax=DEFAULT_NMAX, mc_count=None, seed=None,
                 settings=None, truncation_fraction=0.1) -> EnergyCurve:
    """E0 on a u-grid from one correlated bank; second-difference errors include correlations."""
    t_min, t_max, count = t_window
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, np.linspace(t_min, t_max, int(count)), u_grid, nmax, st)
    E0, resid, err, _, grads = _energy_from_bank(bank, truncation_fraction)
    nu = bank.us.size
    d2 = np.zeros(max(nu - 2, 0))
    for i in range(nu - 2):
        coef = np.zeros_like(grads)
        coef[:, i] = grads[:, i]
        coef[:, i + 1] = -2 * grads[:, i + 1]
        coef[:, i + 2] = grads[:, i + 2]
        d2[i] = math.sqrt(bank.total_variance(coef))
    return EnergyCurve(bank.us, E0, resid, err, d2)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class MonotonicityReport:
    orders: list  # dicts: order, min_signed_difference, noise_floor, roundoff_floor, passed, exact_passed
    passed: bool
    mixture_exact: bool


def _forward_differences(F, j):
    return np.diff(F, n=j)


def monotonicity_check(m, t, u_grid, max_order=4, nmax=DEFAULT_NMAX, mc_count=None, seed=None,
                       settings=None, sigma=3.0) -> MonotonicityReport:
    """Signs of forward differences (-1)^j Delta^j F >= -floor for j = 1..max_order."""
    u_grid = np.asarray(u_grid, dtype=float)
    if u_grid.size < max_order + 1:
        raise ValueError("u-grid too short for the requested difference order")
    steps = np.diff(u_grid)
    if not np.allclose(steps, steps[0], rtol=1e-12, atol=0):
        raise ValueError("monotonicity check needs a uniform u-grid")
    st = _settings(settings, mc_count, seed)
    bank = build_bank(m, [t], u_grid, nmax, st)
    F = bank.total()[0]
    rows = []
    for j in range(1, max_order + 1):
        signed = (-1) ** j * _forward_differences(F, j)
        floors = np.zeros_like(signed)
        for i in range(signed.size):
            coef = np.zeros((1, u_grid.size))
            coef[0, i:i + j + 1] = [(-1) ** (j - r) * math.comb(j, r) for r in range(j + 1)]
            floors[i] = sigma * math.sqrt(bank.total_variance(coef))
        roundoff = 64 * np.finfo(float).eps * (2**j) * np.max(np.abs(F))
        rows.append(dict(order=j, min_signed_difference=float(signed.min()),
                         noise_floor=float(floors.max()), roundoff_floor=float(roundoff),
                         passed=bool(np.all(signed >= -floors - roundoff)),
                         exact_passed=bool(np.all(signed >= -roundoff))))
    return MonotonicityReport(rows, all(r["passed"] for r in rows), all(r["exact_passed"] for r in rows))


@dataclass
class ConcavityReport:
    second_differences: np.ndarray
    tolerance: np.ndarray
    worst_index: int  # middle index of the most-violating triple
    worst_excess: float
    passed: bool


def concavity_check(curve: EnergyCurve, sigma=3.0) -> ConcavityReport:
    u = np.asarray(curve.u, dtype=float)
    if u.size < 3:
        raise ValueError("concavity check needs at least 3 samples")
    E = np.asarray(curve.E0, dtype=float)
    h1 = np.diff(u)[:-1]
    h2 = np.diff(u)[1:]
    # second divided difference scaled to the uniform-grid convention
    d2 = (E[2:] - E[1:-1]) * h1 / h2 - (E[1:-1] - E[:-2]) if not np.allclose(h1, h2) else \
        E[2:] - 2 * E[1:-1] + E[:-2]
    if curve.second_difference_error is not None:
        tol = sigma * np.asarray(curve.second_difference_error, dtype=float)
    else:
        se = np.asarray(curve.std_error, dtype=float)
        tol = sigma * np.sqrt(se[2:] ** 2 + 4 * se[1:-1] ** 2 + se[:-2] ** 2)
    tol = tol + 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(E).max())
    excess = d2 - tol
    k = int(np.argmax(excess))
    return ConcavityReport(d2, tol, k + 1, float(excess[k]), bool(np.all(excess <= 0)))
