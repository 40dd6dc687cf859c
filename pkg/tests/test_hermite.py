import math

import numpy as np
import pytest
from numpy.polynomial import hermite as nph

from fkspectral import hermite
from fkspectral.grid import Grid


@pytest.mark.parametrize("k", [0, 1, 2, 5, 12, 30])
def test_recurrence_matches_numpy_hermite(k):
    x = np.linspace(-4, 4, 33)
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    ref = nph.hermval(x, coef)
    scale = np.abs(ref).max()
    np.testing.assert_allclose(hermite.hermite_poly(k, x), ref, rtol=1e-10, atol=1e-12 * scale)


def test_hermite_functions_match_numpy():
    x = np.linspace(-6, 6, 41)
    H = hermite.hermite_functions(40, x)
    for k in (0, 3, 17, 39):
        coef = np.zeros(k + 1)
        coef[k] = 1.0
        ref = nph.hermval(x, coef) * np.exp(-x * x / 2) / math.sqrt(2.0**k * math.factorial(k) * math.sqrt(math.pi))
        np.testing.assert_allclose(H[k], ref, atol=1e-12)


def test_degree_limit():
    with pytest.raises(OverflowError):
        hermite.log_norm_constant(1.0, 171)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_closed_eigenfunctions_orthonormal(sigma):
    g = Grid(12.0, 12001)
    m = hermite.HermiteModel(sigma, 0.0)
    F = np.array([hermite.closed_eigen(m, k)[1](g.nodes) for k in range(8)])
    gram = (F * g.weights) @ F.T
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-10)


def test_closed_eigenfunction_solves_oscillator():
    m = hermite.HermiteModel(1.5, 0.0)
    x, h = np.linspace(-3, 3, 13), 1e-3
    for k in range(5):
        lam, psi = hermite.closed_eigen(m, k)
        d2 = (psi(x + h) - 2 * psi(x) + psi(x - h)) / h**2
        np.testing.assert_allclose(0.5 * d2 - x * x / (2 * 1.5**2) * psi(x), -lam * psi(x), atol=1e-6)


def test_reduced_pair_relation():
    m = hermite.HermiteModel(2.0, 1.0)
    x, h = np.linspace(-2, 2, 9), 1e-3
    lam, psi = hermite.closed_eigen_reduced(m, 3)
    assert lam == pytest.approx(2.0 * 3.5 - 1 + 0.5)
    tildeV = 1 - 0.5 - 2.0 * x * x
    d2 = (psi(x + h) - 2 * psi(x) + psi(x - h)) / h**2
    np.testing.assert_allclose(0.5 * d2 + tildeV * psi(x), -lam * psi(x), atol=1e-5)


@pytest.mark.parametrize("sigma,c,label", [(1.0, 0.0, "supercritical"), (1.0, 1.0, "critical"),
                                           (2.0, 1.0, "subcritical"), (0.5, 0.0, "supercritical")])
def test_regime(sigma, c, label):
    assert hermite.regime(hermite.HermiteModel(sigma, c)) == label


def test_growth_rate_is_minus_lambda0():
    for s, c in [(1, 0), (1, 1), (2, 1), (0.5, 0.3)]:
        m = hermite.HermiteModel(s, c)
        assert hermite.closed_growth_rate(m) == pytest.approx(-hermite.closed_lambda0_original(m))


@pytest.mark.parametrize("sigma,c", [(1.0, 0.0), (1.0, 1.0), (2.0, 0.5)])
def test_closed_forms_consistent(sigma, c):
    m = hermite.HermiteModel(sigma, c)
    g = Grid(20.0, 8001)
    y = g.nodes
    th = hermite.closed_theta0(m, y)
    e2l = np.exp(-2 * hermite.closed_ell(m, y))
    assert g.trapz(th * th * e2l) == pytest.approx(1.0, rel=1e-10)
    nu = th * e2l / g.trapz(th * e2l)
    np.testing.assert_allclose(nu, hermite.closed_qsd(m, y), atol=1e-12)
    assert g.trapz(hermite.closed_psi0_squared(m, y)) == pytest.approx(1.0, rel=1e-10)
    assert hermite.closed_q_params(m)[2] == pytest.approx(sigma / 2)


def test_mass_limit_value_at_origin():
    assert hermite.closed_mass_limit(hermite.HermiteModel(1.0, 0.0), 0.0) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_h4_radius(sigma):
    r = hermite.h4_x0(sigma)
    assert 1 - sigma**2 * r * r / 2 == pytest.approx(-r)
    assert 1 - sigma**2 * (0.99 * r) ** 2 / 2 > -0.99 * r


def test_model_validation():
    with pytest.raises(ValueError):
        hermite.HermiteModel(0.0, 1.0)
    with pytest.raises(ValueError):
        hermite.HermiteModel(float("nan"), 0.0)
