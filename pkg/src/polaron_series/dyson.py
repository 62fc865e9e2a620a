"""Finite-dimensional harness for the Dyson expansion of exp(-t(A + B)).

With A > 0 diagonal and B = sqrt(A) C sqrt(A), ||C|| < 1,

    exp(-t(A+B)) = exp(-tA) + sum_{n>=1} D_n,
    D_n = (1/2 pi i) oint e^{-tz} (z-A)^{-1} [B (z-A)^{-1}]^n dz
        = (-1)^n int_{Delta_n^t} e^{-t_0 A} B e^{-t_1 A} ... B e^{-t_n A} dt,

where the contour is the wedge Re z = -kappa + gamma |Im z| traversed from
+i infinity to -i infinity (counter-clockwise around the spectrum).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import ContourError
from .simplex import exp_simplex_integral, simplex_rule

DIM_CAP = 16
_TAIL = 32.2  # -ln(1e-14)


@dataclass(frozen=True)
class ContourSpec:
    """Wedge contour and its quadrature.

    ``kappa`` defaults to 1/t and ``im_max`` to the height where |e^{-tz}| has
    fallen by 1e-14 from its peak. With ``anchor="spectrum"`` the vertex sits at
    min(spectrum) - kappa instead of -kappa; the integral is unchanged (the
    wedge still encloses the spectrum) but roundoff stays relative to the
    size of the result when the whole spectrum is far from 0. ``node_count`` (if given) fixes the number
    of nodes on the upper leg; otherwise panels are sized from the pole
    distance and the oscillation period.
    """

    gamma: float = 0.2
    kappa: float | None = None
    node_count: int | None = None
    im_max: float | None = None
    panel_order: int = 16
    tolerance: float = 1e-12
    anchor: str = "spectrum"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.panel_order < 4:
            raise ValueError("panel_order must be >= 4")
        if self.anchor not in ("spectrum", "origin"):
            raise ValueError("anchor must be 'spectrum' or 'origin'")

    def resolved_kappa(self, t):
        return 1.0 / t if self.kappa is None else self.kappa

    def suggested_im_max(self, t):
        return _TAIL / (t * self.gamma)


@dataclass(frozen=True)
class MatrixModel:
    a: np.ndarray  # diagonal of A, all > 0
    C: np.ndarray  # symmetric, ||C|| < 1

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float)
        if a.size > DIM_CAP:
            raise ValueError(f"dimension {a.size} exceeds cap {DIM_CAP}")
        if np.any(a <= 0):
            raise ValueError("A must be positive definite")
        if C.shape != (a.size, a.size) or not np.allclose(C, C.T, atol=1e-14):
            raise ValueError("C must be a symmetric matrix matching A")
        if not self.c_norm < 1:
            raise ValueError("||C|| must be < 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "C", (C + C.T) / 2)

    @property
    def dim(self):
        return self.a.size

    @property
    def A(self):
        return np.diag(self.a)

    @property
    def B(self):
        r = np.sqrt(self.a)
        return r[:, None] * self.C * r[None, :]

    @property
    def c_norm(self):
        C = np.asarray(self.C)
        return float(np.max(np.abs(np.linalg.eigvalsh((C + C.T) / 2)))) if C.size else 0.0


def random_instance(rng: np.random.Generator, dim: int, c_norm: float) -> MatrixModel:
    """A log-uniform on [0.1, 10]; C symmetric Gaussian rescaled to ||C|| = c_norm."""
    a = np.exp(rng.uniform(math.log(0.1), math.log(10.0), dim))
    G = rng.standard_normal((dim, dim))
    C = (G + G.T) / 2
    nrm = np.max(np.abs(np.linalg.eigvalsh(C)))
    C = C * (c_norm / nrm) if nrm > 0 else C
    return MatrixModel(a, C)


def parity_instance(rng: np.random.Generator, dim: int, c_norm: float) -> MatrixModel:
    """C couples only even to odd basis indices (a creation/annihilation-like grading)."""
    a = np.exp(rng.uniform(math.log(0.1), math.log(10.0), dim))
    G = rng.standard_normal((dim, dim))
    par = np.arange(dim) % 2
    G = G * (par[:, None] != par[None, :])
    C = (G + G.T) / 2
    nrm = np.max(np.abs(np.linalg.eigvalsh(C)))
    C = C * (c_norm / nrm) if nrm > 0 else C
    return MatrixModel(a, C)


# ---------------------------------------------------------------------------
# contour quadrature


def _leg_nodes(poles, t, spec: ContourSpec, order=None):
    """Gauss-Legendre nodes y in [0, im_max] on the upper leg, with weights."""
    kappa = spec.resolved_kappa(t)
    im_max = spec.im_max if spec.im_max is not None else spec.suggested_im_max(t)
    order = order or spec.panel_order
    if spec.node_count is not None:
        panels = max(1, math.ceil(spec.node_count / order))
    else:
        dist = kappa if spec.anchor == "spectrum" else kappa + float(np.min(poles))
        width = min(math.pi / t, dist)
        panels = max(4, math.ceil(im_max / width))
    edges = np.linspace(0.0, im_max, panels + 1)
    x, w = special.roots_legendre(order)
    h = np.diff(edges)
    y = (edges[:-1, None] + h[:, None] * (x[None, :] + 1) / 2).ravel()
    wy = (h[:, None] * w[None, :] / 2).ravel()
    return y, wy, kappa, im_max


def _check_height(t, spec, kappa, im_max):
    # tail of the leg beyond im_max, relative to the peak e^{t kappa}
    tail = math.exp(-t * spec.gamma * im_max)
    if tail > 1e-10:
        raise ContourError(
            f"contour height im_max={im_max:g} leaves a truncation error ~{tail:.1e}; "
            f"use im_max >= {spec.suggested_im_max(t):g}", suggested_im_max=spec.suggested_im_max(t))


def _contour_sum(values_fn, poles, t, spec, order=None):
    """-(1/pi) Im int_0^Y f(z(y)) (gamma + i) dy for f(conj z) = conj f(z)."""
    y, wy, kappa, im_max = _leg_nodes(poles, t, spec, order)
    _check_height(t, spec, kappa, im_max)
    shift = float(np.min(poles)) if spec.anchor == "spectrum" else 0.0
    z = shift - kappa + spec.gamma * y + 1j * y
    vals = values_fn(z)  # (nodes, ...)
    integral = np.tensordot(wy * (spec.gamma + 1j), vals, axes=(0, 0))
    return -integral.imag / math.pi


def _dn_integrand(model: MatrixModel, n, t):
    a = model.a
    r = np.sqrt(a)
    C = model.C

    def f(z):
        R = 1.0 / (z[:, None] - a[None, :])  # (nodes, dim) diagonal resolvents
        # sqrt(A) R [C A R]^{n-1} C sqrt(A) R = sqrt(A) R C [A R C]^{n-1} sqrt(A) R
        X = (r[None, :] * R)[:, :, None] * C[None, :, :]
        ARC = (a[None, :] * R)[:, :, None] * C[None, :, :]
        for _ in range(n - 1):
            X = X @ ARC
        X = X * (r[None, :] * R)[:, None, :]
        return np.exp(-t * z)[:, None, None] * X

    return f


def contour_term(model: MatrixModel, n: int, t: float, spec: ContourSpec | None = None):
    """D_n by wedge-contour quadrature; returns (D_n, quadrature error estimate)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    spec = spec or ContourSpec()
    if model.c_norm * math.sqrt(1 + spec.gamma**2) >= 1:
        raise ValueError("gamma too large: need ||C|| sqrt(1 + gamma^2) < 1")
    if not np.any(model.C):
        return np.zeros((model.dim, model.dim)), 0.0
    f = _dn_integrand(model, n, t)
    D = _contour_sum(f, model.a, t, spec)
    D_low = _contour_sum(f, model.a, t, spec, order=max(4, (3 * spec.panel_order) // 4))
    return D, float(np.linalg.norm(D - D_low))


def simplex_term(model: MatrixModel, n: int, t: float, quad_count: int | None = None):
    """(-1)^n int_{Delta_n^t} e^{-t_0 A} B ... B e^{-t_n A} dt.

    By default the exact block-bidiagonal matrix exponential is used (the
    (0, n) block of expm of diagonal blocks -tA and superdiagonal blocks -tB).
    With ``quad_count`` a conical product Gauss rule of that order per axis is
    used instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    dim = model.dim
    A, B = model.A, model.B
    if quad_count is None:
        M = np.zeros(((n + 1) * dim, (n + 1) * dim))
        for k in range(n + 1):
            M[k * dim:(k + 1) * dim, k * dim:(k + 1) * dim] = -t * A
            if k < n:
                M[k * dim:(k + 1) * dim, (k + 1) * dim:(k + 2) * dim] = -t * B
        return linalg.expm(M)[:dim, n * dim:]
    rule = simplex_rule(n, quad_count)
    pts = t * rule.points
    w = rule.weights * t**n / len(rule.weights)
    out = np.zeros((dim, dim))
    a = model.a
    for p, wk in zip(pts, w):
        X = np.diag(np.exp(-p[0] * a))
        for j in range(1, n + 1):
            X = (X @ B) * np.exp(-p[j] * a)[None, :]
        out += wk * X
    return (-1) ** n * out


def dyson_bound(n, c_norm):
    return math.exp(1.5) / math.pi * math.sqrt(n + 2) * c_norm**n


def weighted_bound(n, c_norm, t):
    return math.e / (math.pi * t) * (n + 2) ** ((n + 2) / 2) / (n + 1) ** ((n + 1) / 2) * c_norm**n


def geometric_tail(N, c_norm, tol=1e-18):
    """sum_{n>N} (e^{3/2}/pi) sqrt(n+2) c^n."""
    if c_norm == 0:
        return 0.0
    total, n = 0.0, N + 1
    while True:
        term = dyson_bound(n, c_norm)
        total += term
        if term < tol * max(total, 1e-300) or n > N + 100000:
            return total
        n += 1


@dataclass
class NormBoundResult:
    n: int
    lhs: float
    rhs: float
    weighted_lhs: float
    weighted_rhs: float
    quadrature_error: float
    passed: bool


def norm_bound_check(model: MatrixModel, t: float, n: int, spec: ContourSpec | None = None,
                     allowance: float = 1e-8) -> NormBoundResult:
    """Compare ||D_n|| and ||sqrt(A) D_n sqrt(A)|| with their analytic bounds."""
    D, err = contour_term(model, n, t, spec)
    r = np.sqrt(model.a)
    lhs = float(np.linalg.norm(D, 2))
    wl = float(np.linalg.norm(r[:, None] * D * r[None, :], 2))
    c = model.c_norm
    rhs, wr = dyson_bound(n, c), weighted_bound(n, c, t)
    slack = err + allowance
    passed = lhs <= rhs + slack and wl <= wr + slack * float(np.max(model.a))
    return NormBoundResult(n, lhs, rhs, wl, wr, err, bool(passed))


@dataclass
class ExpansionResult:
    N: int
    residual: float
    tail_bound: float
    quadrature_error: float
    passed: bool


def expansion_residual(model: MatrixModel, t: float, N: int, spec: ContourSpec | None = None) -> ExpansionResult:
    """Spectral norm of exp(-t(A+B)) - exp(-tA) - sum_{n<=N} D_n."""
    H = model.A + model.B
    lam, V = np.linalg.eigh(H)
    exact = (V * np.exp(-t * lam)) @ V.T
    acc = exact - np.diag(np.exp(-t * model.a))
    err = 0.0
    for n in range(1, N + 1):
        D, e = contour_term(model, n, t, spec)
        acc = acc - D
        err += e
    res = float(np.linalg.norm(acc, 2))
    tail = geometric_tail(N, model.c_norm)
    return ExpansionResult(N, res, tail, err, bool(res <= tail + err + 1e-12))


@dataclass
class IdentityResult:
    lhs: float
    rhs: float
    residual: float


def contour_to_simplex_identity(b, t: float, spec: ContourSpec | None = None) -> IdentityResult:
    """Contour side (-1)^{k-1} (1/2 pi i) oint e^{-tz} prod_j (z - b_j)^{-1} dz against
    int_{Delta_{k-1}^t} e^{-sum_j t_j b_j} dt for k nodes.

    For an odd number of nodes (the 2n+1 crossing energies of a diagram) the
    sign factor is 1.
    """
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size < 1 or np.any(b <= 0):
        raise ValueError("nodes must be positive")
    spec = spec or ContourSpec()

    def f(z):
        return np.exp(-t * z) / np.prod(z[:, None] - b[None, :], axis=1)

    lhs = (-1) ** (b.size - 1) * float(_contour_sum(f, b, t, spec))
    rhs = exp_simplex_integral(b, t)
    return IdentityResult(lhs, rhs, abs(lhs - rhs))
