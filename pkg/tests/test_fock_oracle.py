import math

import numpy as np
import pytest
from scipy import integrate

from polaron_series.errors import SizeLimitError
from polaron_series.fock_oracle import (
    DiscreteModes, basis_size, build_hamiltonian, fock_truncation, grid_modes, oracle_series_match,
    single_mode, vacuum_heat, vacuum_heat_curve,
)
from polaron_series.model import ModelSpec
from polaron_series.series import SeriesSettings, build_bank


def test_basis_enumeration():
    tr = fock_truncation(3, 2)
    assert tr.size == basis_size(3, 2) == 10
    assert tr.basis[0] == (0, 0, 0)
    assert len(set(tr.basis)) == tr.size and all(sum(o) <= 2 for o in tr.basis)
    with pytest.raises(SizeLimitError):
        fock_truncation(30, 6, cap=1000)


def test_no_modes():
    modes = DiscreteModes(np.zeros((0, 2)), [], [])
    H = build_hamiltonian(modes, fock_truncation(0, 3), [0.3, 0.4])
    assert H.shape == (1, 1) and H[0, 0] == pytest.approx(0.25)


def test_two_by_two_example():
    g = 0.37
    H = build_hamiltonian(single_mode(g=g), fock_truncation(1, 1), [0.0])
    assert np.allclose(H, [[0, g], [g, 2]])
    r = math.sqrt(1 + g * g)
    for t in (0.0, 0.4, 3.0):
        expected = math.exp(-t) * (math.cosh(t * r) + math.sinh(t * r) / r)
        assert vacuum_heat(H, t) == pytest.approx(expected, rel=1e-13)


def test_diagonal_formula_and_symmetry():
    rng = np.random.default_rng(0)
    modes = DiscreteModes(rng.standard_normal((3, 2)), rng.uniform(0.5, 2, 3), rng.uniform(0, 0.5, 3))
    tr = fock_truncation(3, 3)
    P = np.array([0.2, -0.7])
    H = build_hamiltonian(modes, tr, P)
    assert np.array_equal(H, H.T)
    for i in rng.integers(0, tr.size, 10):
        n = np.array(tr.basis[i])
        q = P - n @ modes.momenta
        assert H[i, i] == pytest.approx(q @ q + n @ modes.frequencies)
    i = tr.basis.index((1, 1, 0))
    j = tr.basis.index((1, 2, 0))
    assert H[i, j] == pytest.approx(modes.amplitudes[1] * math.sqrt(2))


def test_vacuum_heat_limits():
    H = build_hamiltonian(single_mode(g=0.0), fock_truncation(1, 4), [0.6])
    assert vacuum_heat(H, 1.7) == pytest.approx(math.exp(-1.7 * 0.36))
    H = build_hamiltonian(single_mode(g=0.5), fock_truncation(1, 4), [0.6])
    assert vacuum_heat(H, 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        vacuum_heat(H, -1.0)


def test_vacuum_heat_is_positive_exponential_mixture():
    modes = single_mode(kappa=0.7, omega=1.3, g=0.4)
    H = build_hamiltonian(modes, fock_truncation(1, 6), [0.5])
    ts = np.linspace(0, 4, 21)
    F = vacuum_heat_curve(H, ts)
    assert np.all(F > 0)
    for j in range(1, 5):
        assert np.all((-1) ** j * np.diff(F, j) >= -1e-14)
    assert np.all(np.diff(np.log(F), 2) >= -1e-12)


def test_truncation_convergence_monotone():
    modes = single_mode(g=0.3)
    vals = [vacuum_heat(build_hamiltonian(modes, fock_truncation(1, N), [0.5]), 1.5) for N in range(1, 8)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])


def test_grid_modes():
    m = ModelSpec(d=1, beta=0.0, g=0.5, cutoff="gaussian", cutoff_lambda=1.0)
    modes = grid_modes(m, 3, 0.5)
    assert modes.count == 7
    assert np.allclose(modes.amplitudes**2, 0.25 * np.exp(-modes.momenta[:, 0] ** 2) * 0.5)
    assert grid_modes(ModelSpec(d=1, beta=0.3, g=0.5), 3, 0.5).count == 6
    with pytest.raises(ValueError):
        grid_modes(ModelSpec(d=3), 3, 0.5)


def test_discrete_series_first_order_against_quadrature():
    kappa, omega, g = 0.8, 1.2, 0.3
    modes = single_mode(kappa=kappa, omega=omega, g=g)
    t, u = 1.1, 0.4
    E1 = (math.sqrt(u) - kappa) ** 2 + omega
    ref = g * g * integrate.dblquad(
        lambda t1, t0: math.exp(-(t - t1) * u - t1 * E1), 0, t, 0, lambda t0: t - t0, epsabs=1e-15)[0]
    bank = build_bank(modes, [t], [u], 1, SeriesSettings())
    assert bank.contribution(1)[0, 0] == pytest.approx(ref, rel=1e-10)


def test_zero_coupling_agreement_is_exact():
    r = oracle_series_match(single_mode(g=0.0), fock_truncation(1, 4), 0.25, 1.0, 3)
    assert r.difference == 0.0 and r.passed


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("u", [0.0, 0.25, 1.0])
def test_series_matches_oracle(t, u):
    r = oracle_series_match(single_mode(g=0.1), fock_truncation(1, 6), u, t, 3)
    assert r.passed, r


def test_grid_series_matches_oracle():
    m = ModelSpec(d=1, beta=0.0, g=0.15, cutoff="gaussian", cutoff_lambda=1.0)
    modes = grid_modes(m, 1, 0.7)
    r = oracle_series_match(modes, fock_truncation(modes.count, 6), 0.3, 1.0, 3)
    assert r.passed, r
