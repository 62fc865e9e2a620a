import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from polaron_series.curves import EnergyCurve
from polaron_series.errors import CurveError, InfeasibleModelError
from polaron_series.model import (
    GaussianMixture, ModelSpec, check_assumption1, coupling_mixture, dispersion_mixture,
    essential_spectrum, lieb_yamazaki_constants,
)


def radial(m, fn, lo, hi):
    """S_{d-1} int r^{d-1} |v(r)|^2 fn(r) dr with scipy quad (independent oracle)."""
    area = 2 * math.pi ** (m.d / 2) / math.gamma(m.d / 2)
    f = lambda r: r ** (m.d - 1) * float(m.v2(r)) * fn(r)  # noqa: E731
    pts = [lo, min(hi, lo + 1.0)] if hi == math.inf else [lo, hi]
    total = 0.0
    for a, b in zip([pts[0], pts[1]], [pts[1], hi]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=500)[0]
    return area * total


def test_frohlich_assumption1_closed_form():
    alpha, R = 2.0, 1.5
    m = ModelSpec.frohlich(alpha)
    rep = check_assumption1(m, R)
    assert rep.feasible
    assert rep.I1 == pytest.approx(2 * alpha * R / math.pi, rel=1e-12)
    assert math.isfinite(rep.I2)


def test_zero_coupling():
    rep = check_assumption1(ModelSpec(g=0.0), 1.0)
    assert (rep.I1, rep.I2, rep.feasible) == (0.0, 0.0, True)
    fb = lieb_yamazaki_constants(ModelSpec(g=0.0), 1.0, 0.3)
    assert fb.lambda_rel == pytest.approx(0.3)
    assert fb.shift == 0.0


def test_beta_half_dimension_is_infeasible():
    m = ModelSpec(d=3, beta=1.5)
    rep = check_assumption1(m, 1.0)
    assert not rep.feasible
    # the radial integrand of I1 is r^{-1} near 0
    assert "I1" in rep.divergent
    # numeric growth of the truncated integral confirms the divergence
    vals = [radial(m, lambda r: 1.0, 10.0**-k, 1.0) for k in (2, 4, 6)]
    assert vals[1] - vals[0] == pytest.approx(vals[2] - vals[1], rel=1e-6)
    with pytest.raises(InfeasibleModelError):
        lieb_yamazaki_constants(m, 1.0, 0.5)


FEASIBLE = [
    ModelSpec.frohlich(1.0),
    ModelSpec(d=3, beta=0.8, g=0.7, dispersion="massless"),
    ModelSpec(d=3, beta=0.8, g=1.3, dispersion="massive", mass=0.7),
    ModelSpec(d=3, beta=0.0, g=1.0, cutoff="gaussian", cutoff_lambda=3.0),
    ModelSpec(d=2, beta=0.3, g=0.4, dispersion="massive", mass=2.0, cutoff="gaussian", cutoff_lambda=1.5),
    ModelSpec(d=1, beta=0.0, g=0.5),
]


@pytest.mark.parametrize("m", FEASIBLE)
@pytest.mark.parametrize("R", [0.5, 2.0])
def test_assumption1_against_numeric_quadrature(m, R):
    rep = check_assumption1(m, R)
    om = lambda r: float(m.omega(r))  # noqa: E731
    I1 = radial(m, lambda r: 1 / om(r), 0.0, R)
    I2 = radial(m, lambda r: (1 + 1 / om(r)) / r**2, R, math.inf)
    assert rep.I1 == pytest.approx(I1, rel=1e-8)
    assert rep.I2 == pytest.approx(I2, rel=1e-8)


def test_massless_slow_decay_has_divergent_I2():
    rep = check_assumption1(ModelSpec(d=3, beta=0.5, dispersion="massless"), 1.0)
    assert rep.divergent == ("I2",)


def test_frohlich_lambda_piece_and_scaling():
    alpha = 0.7
    m = ModelSpec.frohlich(alpha)
    for R in (0.5, 1.0, 3.0):
        fb = lieb_yamazaki_constants(m, R, 0.4)
        assert fb.lambda_piece == pytest.approx(8 * alpha / (math.pi * R), rel=1e-12)
        assert fb.lambda_rel == pytest.approx(0.4 + fb.lambda_piece / 0.4)
        num = 4 * radial(m, lambda r: 1 / r**2, R, math.inf)
        assert fb.lambda_piece == pytest.approx(num, rel=1e-8)
    assert lieb_yamazaki_constants(m, 2.0, 0.4).lambda_piece == pytest.approx(
        lieb_yamazaki_constants(m, 1.0, 0.4).lambda_piece / 2, rel=1e-12)


def test_lambda_rel_decreases_with_radius():
    m = ModelSpec.frohlich(1.0)
    vals = [lieb_yamazaki_constants(m, R, 0.5).lambda_rel for R in (0.5, 1, 2, 4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_coupling_mixture_exact_cases():
    mix = coupling_mixture(ModelSpec(beta=0.0, g=1.0), 16)
    assert mix.exact and len(mix) == 1
    assert (mix.weights[0], mix.rates[0]) == (1.0, 0.0)
    mix = coupling_mixture(ModelSpec(beta=0.0, g=1.0, cutoff="gaussian", cutoff_lambda=2.0), 16)
    assert mix.exact and mix.rates[0] == pytest.approx(0.25) and mix.weights[0] == 1.0
    with pytest.raises(ValueError):
        coupling_mixture(ModelSpec(), 0)


def test_coupling_mixture_pointwise_beta1():
    mix = coupling_mixture(ModelSpec(beta=1.0, g=1.0), 64)
    u = np.array([0.5, 1.0, 2.0, 10.0])
    assert np.max(np.abs(mix(u) * u - 1)) < 1e-8


@pytest.mark.parametrize("beta,d", [(1.0, 3), (0.5, 3), (0.3, 1), (1.2, 3)])
def test_coupling_mixture_gaussian_averages(beta, d):
    # the mixture is built for integration against Gaussians of rate near `scale`
    m = ModelSpec(d=d, beta=beta, g=1.0)
    mix = coupling_mixture(m, 16, scale=1.0)
    for r in (0.5, 1.0, 2.0, 10.0):
        exact = math.pi ** (d / 2) * math.gamma(d / 2 - beta) / math.gamma(d / 2) * r ** (beta - d / 2)
        assert mix.gaussian_average(r, d) == pytest.approx(exact, rel=2e-8)


def test_coupling_mixture_with_cutoff_pointwise():
    m = ModelSpec(beta=0.5, g=0.8, cutoff="gaussian", cutoff_lambda=1.7)
    mix = coupling_mixture(m, 64)
    u = np.array([0.3, 1.0, 4.0])
    assert np.allclose(mix(u), m.v2(np.sqrt(u)), rtol=1e-7)


def test_dispersion_mixture_examples():
    mix = dispersion_mixture(ModelSpec(dispersion="constant"), 1.0, 16)
    assert mix.exact and mix.weights[0] == pytest.approx(math.exp(-1)) and mix.rates[0] == 0
    mix = dispersion_mixture(ModelSpec(dispersion="massless"), 1.0)
    assert abs(mix(1.0) - math.exp(-1)) < 1e-6
    mix = dispersion_mixture(ModelSpec(dispersion="massive", mass=1.0), 2.0)
    assert abs(mix(0.0) - math.exp(-2)) < 1e-6
    with pytest.raises(ValueError):
        dispersion_mixture(ModelSpec(dispersion="massless"), 0.0)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0.05, 5.0), u=st.floats(0.0, 20.0), mass=st.floats(0.0, 3.0))
def test_dispersion_mixture_pointwise(s, u, mass):
    m = ModelSpec(dispersion="massive", mass=mass)
    mix = dispersion_mixture(m, s, 256)
    target = math.exp(-s * math.sqrt(u + mass**2))
    assert abs(mix(u) - target) < 1e-8
    assert np.all(mix.weights > 0) and np.all(mix.rates >= 0)


def test_mixture_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        GaussianMixture(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        GaussianMixture(np.array([1.0]), np.array([-1.0]))


def _curve(u, E0):
    return EnergyCurve(np.asarray(u, float), np.asarray(E0, float), np.zeros(len(u)))


def test_essential_spectrum_constant_dispersion():
    u = np.linspace(0, 1, 6)
    E0 = -0.1 + 0.9 * u - 0.05 * u**2
    ess = essential_spectrum(_curve(u, E0), ModelSpec.frohlich(0.2))
    for P in (0.0, 0.3, 1.0, 5.0):
        assert ess(P) == E0[0] + 1.0


def test_essential_spectrum_free_massless():
    # free particle, omega = |k|: inf_r (|P| - r)^2 + r, so r = max(|P| - 1/2, 0)
    u = np.linspace(0, 9, 901)
    ess = essential_spectrum(_curve(u, u), ModelSpec(dispersion="massless", g=0.0))
    for P in (0.0, 0.3, 2.0):
        expected = P**2 if P <= 0.5 else P - 0.25
        assert ess(P) == pytest.approx(expected, abs=2e-3)
        assert ess(P) >= u.min() - 1e-12


def test_essential_spectrum_needs_curve_from_origin():
    with pytest.raises(CurveError):
        essential_spectrum(_curve([0.5, 1.0], [0.5, 1.0]), ModelSpec())
    with pytest.raises(CurveError):
        essential_spectrum(_curve([0.0], [0.0]), ModelSpec())
