import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from polaron_series.errors import IntegrabilityError, SingularEliminationError
from polaron_series.model import ModelSpec
from polaron_series.pairings import Pairing, crossing_table, enumerate_pairings
from polaron_series.quadform import (
    QuadraticForm, assemble_quadratic_form, crossing_energy, gaussian_integral, momentum_integral,
    schur_eliminate,
)

T12 = crossing_table(Pairing(((1, 2),)))
T1324 = crossing_table(Pairing(((1, 3), (2, 4))))


def random_psd(rng, n):
    G = rng.standard_normal((n + 1, n + 1))
    Q = G @ G.T + 0.1 * np.eye(n + 1)
    return QuadraticForm(Q, np.abs(rng.standard_normal(n)))


def test_crossing_energy_examples():
    m = ModelSpec(d=3)
    P = np.array([0.3, -0.2, 0.5])
    k = np.array([[1.0, 0, 0]])
    assert crossing_energy(T12, 0, P, k, m) == pytest.approx(P @ P)
    assert crossing_energy(T12, 2, P, k, m) == pytest.approx(P @ P)
    assert crossing_energy(T12, 1, np.zeros(3), k, m) == pytest.approx(2.0)
    e1 = np.array([1.0, 0, 0])
    assert crossing_energy(T1324, 2, e1, np.array([e1, e1]), m) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        crossing_energy(T12, 1, np.zeros(2), k, m)


def test_assemble_examples():
    q = assemble_quadratic_form(T12, [0.2, 0.5, 0.3])
    assert np.allclose(q.entries, [[1.0, -0.5], [-0.5, 0.5]])
    assert np.allclose(q.omega_weights, [0.5])
    q = assemble_quadratic_form(T1324, np.zeros(5))
    assert not np.any(q.entries) and not np.any(q.omega_weights)
    with pytest.raises(ValueError):
        assemble_quadratic_form(T12, [0.1, -0.1, 0.3])


@pytest.mark.parametrize("dispersion", ["constant", "massless", "massive"])
def test_pointwise_identity(dispersion):
    rng = np.random.default_rng(5)
    m = ModelSpec(d=3, dispersion=dispersion, mass=0.7)
    for p in enumerate_pairings(3)[::3]:
        tab = crossing_table(p)
        for _ in range(100 // 5):
            times = rng.exponential(size=2 * p.n + 1)
            q = assemble_quadratic_form(tab, times)
            P = rng.standard_normal(3)
            k = rng.standard_normal((p.n, 3))
            lhs = sum(t * crossing_energy(tab, j, P, k, m) for j, t in enumerate(times))
            rhs = q(P, k) + float(q.omega_weights @ m.omega(np.linalg.norm(k, axis=1)))
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
            assert q.entries[0, 0] == pytest.approx(times.sum())
            assert np.allclose(np.diag(q.entries)[1:], q.omega_weights)


def test_schur_scalar_example():
    q = QuadraticForm(np.array([[2.0, -1.0], [-1.0, 1.0]]), [1.0])
    assert np.allclose(schur_eliminate(q).entries, [[1.0]])
    with pytest.raises(SingularEliminationError):
        schur_eliminate(QuadraticForm(np.array([[1.0, 0.0], [0.0, 0.0]]), [0.0]))


def test_schur_preserves_psd():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        G = rng.standard_normal((n + 1, n))
        q = QuadraticForm(G @ G.T + 1e-3 * np.eye(n + 1), np.ones(n))  # rank-deficient plus a nudge
        out = schur_eliminate(q)
        assert np.linalg.eigvalsh(out.entries).min() >= -1e-12


def test_schur_variational_characterisation():
    rng = np.random.default_rng(2)
    d = 2
    for _ in range(20):
        n = int(rng.integers(1, 4))
        q = random_psd(rng, n)
        red = schur_eliminate(q)
        P = rng.standard_normal(d)
        k = rng.standard_normal((n, d))

        def f(x):
            kk = k.copy()
            kk[-1] = x
            return q(P, kk)

        H = 2 * q.entries[n, n] * np.eye(d)
        res = optimize.minimize(f, np.zeros(d), method="trust-exact",
                                jac=lambda x: optimize.approx_fprime(x, f, 1e-7),
                                hess=lambda x: H, options=dict(gtol=1e-11))
        assert abs(res.fun - red(P, k[:-1])) < 1e-10 * max(1.0, abs(res.fun))


def test_gaussian_integral_n1_example():
    for d in (1, 2, 3):
        q = assemble_quadratic_form(T12, [0.0, 1.0, 0.0])
        q = QuadraticForm(q.entries + np.diag([0.0, 1.0]), q.omega_weights)  # rate x = 1
        red = gaussian_integral(q, d)
        assert red.exponent == pytest.approx(0.5)
        assert red.amplitude == pytest.approx((math.pi / 2) ** (d / 2))


def test_gaussian_integral_decoupled():
    Q = np.diag([2.5, 1.0, 3.0])
    red = gaussian_integral(QuadraticForm(Q, [1.0, 3.0]), 3)
    assert red.exponent == pytest.approx(2.5)
    assert red.amplitude == pytest.approx((math.pi**2 / 3.0) ** 1.5)


def test_gaussian_integral_singular_step_is_named():
    Q = np.zeros((3, 3))
    Q[0, 0] = Q[1, 1] = 1.0
    with pytest.raises(SingularEliminationError) as exc:
        gaussian_integral(QuadraticForm(Q, [1.0, 0.0]), 3)
    assert exc.value.step == 1


def test_gaussian_integral_monte_carlo():
    rng = np.random.default_rng(11)
    for case in range(6):
        n, d = 1 + case % 3, 1 + (case // 2) % 3
        q = random_psd(rng, n)
        red = gaussian_integral(q, d)
        A = q.entries[1:, 1:]
        sigma2 = 1.0 / np.linalg.eigvalsh(A).min()  # proposal wider than the integrand
        N = 200_000
        k = rng.standard_normal((N, n, d)) * math.sqrt(sigma2)
        logpdf = -(k**2).sum(axis=(1, 2)) / (2 * sigma2) - n * d / 2 * math.log(2 * math.pi * sigma2)
        for Pn in (0.0, 1.0, 2.0):
            P = np.zeros(d)
            P[0] = Pn
            X = np.concatenate([np.broadcast_to(P, (N, 1, d)), k], axis=1)
            Qv = np.einsum("ij,nia,nja->n", q.entries, X, X)
            w = np.exp(-Qv - logpdf)
            est, se = w.mean(), w.std(ddof=1) / math.sqrt(N)
            assert abs(est - red(Pn**2)) <= 3 * se + 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_order_invariance_and_lambda_range(n, seed):
    rng = np.random.default_rng(seed)
    q = random_psd(rng, n)
    base = gaussian_integral(q, 3)
    perm = list(rng.permutation(np.arange(1, n + 1)))
    other = gaussian_integral(q, 3, order=perm)
    assert abs(other.exponent - base.exponent) <= 1e-10 * max(1.0, base.exponent)
    assert abs(other.log_amplitude - base.log_amplitude) <= 1e-10 * max(1.0, abs(base.log_amplitude))
    assert -1e-12 <= base.exponent <= q.entries[0, 0] + 1e-12
    # closed form c = (pi^n / det A)^{d/2}
    A = q.entries[1:, 1:]
    assert base.log_amplitude == pytest.approx(1.5 * (n * math.log(math.pi) - np.linalg.slogdet(A)[1]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_rates_increase_lambda(n, seed):
    rng = np.random.default_rng(seed)
    q = random_psd(rng, n)
    extra = np.diag(np.concatenate([[0.0], rng.exponential(size=n)]))
    bumped = QuadraticForm(q.entries + extra, q.omega_weights)
    assert gaussian_integral(bumped, 3).exponent >= gaussian_integral(q, 3).exponent - 1e-12


def test_momentum_integral_zero_coupling():
    mix = momentum_integral(T12, [0.1, 0.5, 0.2], ModelSpec(g=0.0))
    assert len(mix) == 0 and mix(1.0) == 0.0


@pytest.mark.parametrize("d", [1, 3])
def test_momentum_integral_cutoff_closed_form(d):
    lam_c = 1.7
    m = ModelSpec(d=d, beta=0.0, g=1.0, cutoff="gaussian", cutoff_lambda=lam_c)
    t1 = 0.8
    mix = momentum_integral(T12, [0.0, t1, 0.0], m)
    x = 1 / lam_c**2
    assert mix.exact and len(mix) == 1
    assert mix.weights[0] == pytest.approx((math.pi / (t1 + x)) ** (d / 2) * math.exp(-t1))
    assert mix.rates[0] == pytest.approx(t1 - t1**2 / (t1 + x))


def radial_n1(m, times, u):
    t0, t1, t2 = times
    P = math.sqrt(u)
    area = 2 * math.pi ** (m.d / 2) / math.gamma(m.d / 2)
    if P == 0:
        f = lambda r: area * r ** (m.d - 1) * math.exp(  # noqa: E731
            -(t0 + t2) * u - t1 * (r * r + float(m.omega(r)))) * float(m.v2(r))
        return integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400)[0]
    raise NotImplementedError


@pytest.mark.parametrize("m", [
    ModelSpec.frohlich(1.0),
    ModelSpec(d=3, beta=1.0, dispersion="massless"),
    ModelSpec(d=3, beta=0.5, dispersion="massive", mass=1.0, cutoff="gaussian", cutoff_lambda=2.0),
    ModelSpec(d=1, beta=0.0, cutoff="gaussian", cutoff_lambda=1.0),
])
@pytest.mark.parametrize("times", [[0.3, 0.5, 0.2], [0.1, 2.0, 0.4], [0.0, 0.05, 0.0]])
def test_momentum_integral_matches_radial_quadrature(m, times):
    mix = momentum_integral(T12, times, m)
    assert mix(0.0) == pytest.approx(radial_n1(m, times, 0.0), rel=1e-6)


def test_momentum_integral_alternating_differences():
    m = ModelSpec.frohlich(1.0)
    rng = np.random.default_rng(3)
    u = np.linspace(0, 4, 12)
    for p in enumerate_pairings(2):
        mix = momentum_integral(crossing_table(p), rng.exponential(size=5), m)
        F = mix(u)
        assert np.all(mix.weights > 0) and np.all(mix.rates >= 0)
        for j in range(1, 6):
            assert np.all((-1) ** j * np.diff(F, j) >= -1e-15 * 2**j * F.max())


def test_momentum_integral_coupling_scaling_is_exact():
    m = ModelSpec(d=3, beta=0.6, g=0.3, dispersion="massless")
    times = [0.2, 0.7, 0.4, 0.1, 0.6]
    a = momentum_integral(T1324, times, m)
    b = momentum_integral(T1324, times, m.with_coupling(0.6))
    assert np.array_equal(b.weights, a.weights * (0.6**2 / 0.3**2) ** 2) or \
        np.allclose(b.weights, a.weights * 16, rtol=4e-16, atol=0)
    assert np.array_equal(a.rates, b.rates)


def test_momentum_integral_zero_exposure_rejected():
    with pytest.raises(IntegrabilityError):
        momentum_integral(T12, [1.0, 0.0, 0.0], ModelSpec(d=3, beta=0.0))
    with pytest.raises(IntegrabilityError):
        momentum_integral(T12, [1.0, 0.0, 0.0], ModelSpec.frohlich(1.0))
    # the cutoff regularises a zero exposure
    mix = momentum_integral(T12, [1.0, 0.0, 0.0], ModelSpec(d=3, cutoff="gaussian", cutoff_lambda=1.0))
    assert mix(0.0) == pytest.approx(math.pi**1.5)
