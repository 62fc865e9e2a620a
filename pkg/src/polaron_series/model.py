"""Radial polaron models: |v(k)|^2 = g^2 |k|^{-2 beta} (x Gaussian cutoff), omega in
{1, |k|, sqrt(|k|^2 + m^2)}.

Besides the model record this module holds the Lieb-Yamazaki integrals, the
Gaussian-mixture (Bernstein) representations of |v|^2 and exp(-s omega), and
the essential-spectrum threshold computed from a sampled E0 curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import CurveError, InfeasibleModelError

DISPERSIONS = ("constant", "massless", "massive")
CUTOFFS = ("none", "gaussian")

# log(1e12): tails of subordination integrands are dropped below this many e-folds
_TAIL_EFOLDS = 27.7


@dataclass(frozen=True)
class ModelSpec:
    d: int = 3
    dispersion: str = "constant"
    mass: float = 0.0
    g: float = 1.0
    beta: float = 0.0
    cutoff: str = "none"
    cutoff_lambda: float = math.inf

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if self.dispersion not in DISPERSIONS:
            raise ValueError(f"unknown dispersion {self.dispersion!r}")
        if self.cutoff not in CUTOFFS:
            raise ValueError(f"unknown cutoff {self.cutoff!r}")
        if self.beta < 0:
            raise ValueError("coupling exponent beta must be >= 0")
        if self.mass < 0:
            raise ValueError("mass must be >= 0")
        if self.cutoff == "gaussian" and not (0 < self.cutoff_lambda < math.inf):
            raise ValueError("gaussian cutoff needs 0 < cutoff_lambda < inf")

    @classmethod
    def frohlich(cls, alpha: float, **kw) -> "ModelSpec":
        """d=3, omega=1, v(k) = sqrt(alpha/(2 pi^2)) / |k|."""
        return cls(d=3, dispersion="constant", g=math.sqrt(alpha / (2 * math.pi**2)), beta=1.0, **kw)

    @property
    def g2(self) -> float:
        return float(self.g) ** 2

    @property
    def cutoff_rate(self) -> float:
        """Rate added to every Gaussian node by the cutoff, 1/Lambda^2."""
        return 1.0 / self.cutoff_lambda**2 if self.cutoff == "gaussian" else 0.0

    @property
    def effective_mass(self) -> float:
        return self.mass if self.dispersion == "massive" else 0.0

    def omega(self, r):
        r = np.asarray(r, dtype=float)
        if self.dispersion == "constant":
            return np.ones_like(r)
        if self.dispersion == "massless":
            return np.abs(r)
        return np.sqrt(r**2 + self.mass**2)

    def v2(self, r):
        """|v(k)|^2 as a function of r = |k|."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = self.g2 * r ** (-2.0 * self.beta) if self.beta else np.full_like(r, self.g2)
        if self.cutoff == "gaussian":
            out = out * np.exp(-(r**2) * self.cutoff_rate)
        return out

    def sphere_area(self) -> float:
        """Surface area of the unit sphere in R^d."""
        return 2 * math.pi ** (self.d / 2) / math.gamma(self.d / 2)

    def with_coupling(self, g: float) -> "ModelSpec":
        return ModelSpec(self.d, self.dispersion, self.mass, g, self.beta, self.cutoff, self.cutoff_lambda)


# ---------------------------------------------------------------------------
# radial power-law integrals


def _upper_gamma(a, x):
    """Non-normalized upper incomplete gamma Gamma(a, x) for real a, x > 0."""
    if a > 0:
        return special.gammaincc(a, x) * special.gamma(a)
    if a == 0:
        return special.exp1(x)
    # Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a
    return (_upper_gamma(a + 1, x) - x**a * math.exp(-x)) / a


def _power_integral(p, lo, hi, cutoff_rate):
    """int_lo^hi r^p exp(-c r^2) dr for lo = 0 or hi = inf; inf when divergent."""
    if lo == 0:
        if p <= -1:
            return math.inf
        if cutoff_rate == 0:
            return hi ** (p + 1) / (p + 1)
        a = (p + 1) / 2
        return special.gammainc(a, cutoff_rate * hi**2) * special.gamma(a) / (2 * cutoff_rate**a)
    if hi == math.inf:
        if cutoff_rate == 0:
            return lo ** (p + 1) / (-p - 1) if p < -1 else math.inf
        a = (p + 1) / 2
        return _upper_gamma(a, cutoff_rate * lo**2) / (2 * cutoff_rate**a)
    raise ValueError("only [0, R] or [R, inf) ranges are supported")


def _closed_integral(m: ModelSpec, powers, lo, hi):
    """S_{d-1} g^2 sum_p int_lo^hi r^{d-1-2beta+p} exp(-c r^2) dr."""
    if m.g == 0:
        return 0.0
    base = m.d - 1 - 2 * m.beta
    return m.sphere_area() * m.g2 * sum(_power_integral(base + p, lo, hi, m.cutoff_rate) for p in powers)


def _numeric_integral(m: ModelSpec, fn, lo, hi, power_at_inf=None):
    """S_{d-1} g^2 int_lo^hi r^{d-1-2beta} fn(r) exp(-c r^2) dr by adaptive quadrature.

    ``fn`` must be smooth and bounded near 0; ``power_at_inf`` is the power of r
    of the full integrand at infinity, used to flag divergence.
    """
    if m.g == 0:
        return 0.0
    base = m.d - 1 - 2 * m.beta
    c = m.cutoff_rate
    pre = m.sphere_area() * m.g2
    f = lambda r: fn(r) * math.exp(-c * r * r)  # noqa: E731
    if lo == 0:
        if base <= -1:
            return math.inf
        val, _ = integrate.quad(f, 0, hi, weight="alg", wvar=(base, 0), epsabs=0, epsrel=1e-13, limit=200)
        return pre * val
    if c == 0 and power_at_inf is not None and power_at_inf >= -1:
        return math.inf
    val, _ = integrate.quad(lambda r: r**base * f(r), lo, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    return pre * val


def _integrals(m: ModelSpec, R: float):
    """(I1, J, L) = int_{<R} |v|^2/omega, int_{>R} |v|^2/|k|^2, int_{>R} |v|^2/(|k|^2 omega)."""
    J = _closed_integral(m, (-2,), R, math.inf)
    if m.dispersion == "constant":
        return _closed_integral(m, (0,), 0, R), J, J
    if m.dispersion == "massless" or m.mass == 0:
        return _closed_integral(m, (-1,), 0, R), J, _closed_integral(m, (-3,), R, math.inf)
    mass = m.mass
    I1 = _numeric_integral(m, lambda r: 1.0 / math.sqrt(r * r + mass * mass), 0, R)
    L = _numeric_integral(m, lambda r: 1.0 / (r * r * math.sqrt(r * r + mass * mass)), R, math.inf,
                          power_at_inf=m.d - 1 - 2 * m.beta - 3)
    return I1, J, L


@dataclass(frozen=True)
class Assumption1Report:
    radius: float
    I1: float
    I2: float
    feasible: bool
    divergent: tuple[str, ...]


def check_assumption1(m: ModelSpec, R: float) -> Assumption1Report:
    """Split v at |k| = R and evaluate both Lieb-Yamazaki integrals.

    I1 = int_{|k|<=R} |v|^2/omega,  I2 = int_{|k|>R} |v|^2/|k|^2 (1 + 1/omega).
    """
    if not R > 0:
        raise ValueError("split radius must be positive")
    I1, J, L = _integrals(m, R)
    I2 = J + L
    divergent = tuple(name for name, val in (("I1", I1), ("I2", I2)) if not math.isfinite(val))
    return Assumption1Report(R, I1, I2, not divergent, divergent)


@dataclass(frozen=True)
class FormBoundReport:
    """Constants of the bound  +-Phi(v) <= lambda_rel (|P-P_f|^2 + dGamma(omega)) + shift."""

    split_radius: float
    epsilon: float
    lambda_rel: float
    shift: float
    lambda_piece: float
    I1: float
    J: float  # int_{|k|>R} |v|^2/|k|^2


def lieb_yamazaki_constants(m: ModelSpec, R: float, eps: float) -> FormBoundReport:
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    rep = check_assumption1(m, R)
    if not rep.feasible:
        raise InfeasibleModelError(f"Lieb-Yamazaki integrals diverge: {', '.join(rep.divergent)}",
                                   divergent=rep.divergent)
    _, J, L = _integrals(m, R)
    lam = 4.0 * L
    return FormBoundReport(
        split_radius=R,
        epsilon=eps,
        lambda_rel=eps + lam / eps,
        shift=(rep.I1 + 2.0 * J) / eps,
        lambda_piece=lam,
        I1=rep.I1,
        J=J,
    )


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True)
class GaussianMixture:
    """sum_i w_i exp(-x_i u) as a function of u = |k|^2."""

    weights: np.ndarray
    rates: np.ndarray
    exact: bool = False

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        x = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if w.shape != x.shape:
            raise ValueError("weights and rates must have equal length")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be strictly positive")
        if np.any(x < 0) or not np.all(np.isfinite(x)):
            raise ValueError("mixture rates must be finite and >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", x)

    def __len__(self):
        return len(self.weights)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.sum(self.weights * np.exp(-np.multiply.outer(u, self.rates)), axis=-1)

    def gaussian_average(self, r, d):
        """int_{R^d} exp(-r|k|^2) mixture(|k|^2) dk."""
        r = np.asarray(r, dtype=float)
        return np.sum(self.weights * (np.pi / np.add.outer(r, self.rates)) ** (d / 2), axis=-1)


def _prune(w, x, rel=1e-14):
    keep = w >= rel * w.max()
    return w[keep], x[keep]


def coupling_nodes(beta: float, d: int, order: int, scale: float = 1.0):
    """Nodes for |k|^{-2 beta} = int_0^inf x^{beta-1} e^{-x|k|^2} dx / Gamma(beta).

    Returns (weights, rates) without the g^2 prefactor and without the cutoff.
    With x = a w/(1-w) the x-integral against a d-dimensional Gaussian of rate a
    becomes a Beta integral; Gauss-Jacobi nodes for the weight
    w^{beta-1} (1-w)^{d/2-beta-1} make it exact for that Gaussian and very
    accurate for nearby rates. All weights are positive.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if beta == 0:
        return np.ones(1), np.zeros(1)
    if not beta < d / 2:
        raise ValueError(f"beta={beta} must be < d/2={d / 2} for a Gaussian-integrable coupling")
    p, q = beta - 1.0, d / 2 - beta - 1.0
    xj, wj = special.roots_jacobi(order, q, p)  # weight (1-x)^q (1+x)^p on [-1, 1]
    w = (1.0 + xj) / 2
    ww = wj / 2.0 ** (p + q + 1)
    rates = scale * w / (1.0 - w)
    weights = scale**beta / special.gamma(beta) * ww * (1.0 - w) ** (-d / 2)
    return weights, rates


def coupling_mixture(m: ModelSpec, quadrature_order: int = 16, scale: float = 1.0) -> GaussianMixture:
    """Bernstein mixture for |v|^2 as a function of u = |k|^2.

    ``scale`` is the Gaussian rate the mixture is tuned for; see ``coupling_nodes``.
    """
    if quadrature_order < 1:
        raise ValueError("quadrature order must be >= 1")
    w, x = coupling_nodes(m.beta, m.d, quadrature_order, scale)
    w, x = _prune(w, x)
    return GaussianMixture(m.g2 * w, x + m.cutoff_rate, exact=(m.beta == 0))


def subordination_nodes(s, order, d=None, gaussian_rate=None, mass=0.0):
    """Trapezoid nodes for exp(-s sqrt(u + m^2)) = sum_i w_i exp(-tau_i u).

    Uses tau = s^2 theta, theta = e^y and the Levy density
    (4 pi)^{-1/2} theta^{-3/2} exp(-1/(4 theta)). The y-window drops tails below
    1e-12 of the peak; when the mixture will be integrated against a
    d-dimensional Gaussian of rate ``gaussian_rate`` the right tail is cut where
    that Gaussian integral has suppressed it. ``s`` may be an array; output
    arrays then have shape s.shape + (order,).
    """
    s = np.asarray(s, dtype=float)
    if order < 2:
        raise ValueError("subordination quadrature needs at least 2 nodes")
    L = _TAIL_EFOLDS
    y_lo = np.full(s.shape, -math.log(4 * (L + 5.0)))
    y_hi = np.full(s.shape, 2 * L + 4.0)
    if gaussian_rate is not None and d is not None:
        ratio = np.log(np.maximum(s**2, 1e-300) / np.asarray(gaussian_rate, dtype=float))
        y_hi = np.minimum(y_hi, (2 * L - d * ratio) / (d + 1) + 4.0)
    if mass > 0:
        y_hi = np.minimum(y_hi, math.log(L + 10.0) - 2 * np.log(np.maximum(s, 1e-300)) - 2 * math.log(mass))
    y_hi = np.maximum(y_hi, y_lo + 1.0)
    k = np.linspace(0.0, 1.0, order)
    y = y_lo[..., None] + (y_hi - y_lo)[..., None] * k
    h = (y_hi - y_lo) / (order - 1)
    theta = np.exp(y)
    tau = s[..., None] ** 2 * theta
    logw = -0.5 * y - 0.25 / theta - tau * mass**2 - 0.5 * math.log(4 * math.pi)
    w = np.exp(logw) * h[..., None]
    w[..., 0] *= 0.5
    w[..., -1] *= 0.5
    return w, tau


def dispersion_mixture(m: ModelSpec, s: float, quadrature_order: int = 256,
                       gaussian_rate: float | None = None) -> GaussianMixture:
    """Mixture for exp(-s omega(k)) as a function of u = |k|^2."""
    if quadrature_order < 1:
        raise ValueError("quadrature order must be >= 1")
    if not s > 0:
        raise ValueError("exposure s must be positive")
    if m.dispersion == "constant":
        return GaussianMixture(np.array([math.exp(-s)]), np.zeros(1), exact=True)
    w, x = subordination_nodes(s, quadrature_order, d=m.d, gaussian_rate=gaussian_rate,
                               mass=m.effective_mass)
    w, x = _prune(w, x)
    return GaussianMixture(w, x, exact=False)


# ---------------------------------------------------------------------------
# essential spectrum


def essential_spectrum(curve, m: ModelSpec):
    """Return |P| -> E_ess(P) built from a sampled ground-state curve.

    For the dispersions supported here sum_j omega(k_j) >= omega(sum_j k_j)
    (trivially for omega = 1, by the triangle/Minkowski inequality otherwise),
    so the one-boson branch attains the infimum.
    """
    u = np.asarray(curve.u, dtype=float)
    E0 = np.asarray(curve.E0, dtype=float)
    if u.size < 2:
        raise CurveError("essential spectrum needs an E0 curve with at least 2 samples")
    if np.any(np.diff(u) <= 0):
        raise CurveError("E0 curve must be sampled on strictly increasing u")
    if u[0] != 0.0:
        raise CurveError("E0 curve must start at u = 0; extend the sampled range")

    if m.dispersion == "constant":
        value = float(np.min(E0)) + 1.0

        def e_ess(P):
            return np.full(np.shape(P), value) if np.ndim(P) else value

        return e_ess

    q_nodes = np.sqrt(u)
    q_max = q_nodes[-1]

    def e0_min_on(lo, hi):
        # E0 is piecewise linear in u, so its minimum sits at an endpoint or a node
        lo_u, hi_u = lo**2, hi**2
        inside = E0[(u >= lo_u) & (u <= hi_u)]
        ends = np.interp([lo_u, hi_u], u, E0)
        return min(inside.min() if inside.size else math.inf, ends.min())

    def e_ess_scalar(P):
        P = abs(float(P))
        best = math.inf
        for r in np.linspace(0.0, P + q_max, 801):
            lo, hi = abs(P - r), min(P + r, q_max)
            if lo > q_max:
                continue
            best = min(best, float(m.omega(r)) + e0_min_on(lo, hi))
        return best

    def e_ess(P):
        if np.ndim(P):
            return np.array([e_ess_scalar(p) for p in np.ravel(P)]).reshape(np.shape(P))
        return e_ess_scalar(P)

    return e_ess
