import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkspectral import hermite
from fkspectral.cli import _battery
from fkspectral.qsd import (
    DegenerateEvolutionError,
    attraction,
    build_qsd,
    check_qsd_fixed_point,
    conditional_evolution,
    evolve_measure,
    point_mass,
    tv_distance,
)


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_qsd_matches_closed_form(request, c):
    b = request.getfixturevalue("basis10" if c == 0 else "basis11")
    nu = build_qsd(b)
    assert nu.grid.trapz(nu.density) == pytest.approx(1.0, abs=1e-12)
    # reduced coordinates with sigma = 1 coincide with the original ones
    np.testing.assert_allclose(nu.density, hermite.closed_qsd(hermite.HermiteModel(1.0, c), b.x), atol=1e-10)
    assert nu.mean() == pytest.approx(-c, abs=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_fixed_point_battery(kern11, t):
    b = kern11.basis
    rep = check_qsd_fixed_point(build_qsd(b), kern11, t, _battery(b.x))
    assert len(rep["eigen_residuals"]) == 20
    assert rep["passed"] and rep["max_residual"] < 1e-9


def test_non_qsd_fails_fixed_point(kern10):
    b = kern10.basis
    fake = build_qsd(b)
    shifted = type(fake)(fake.grid, point_mass(b.grid, 1.0, 0.5), 1.0)
    assert not check_qsd_fixed_point(shifted, kern10, 1.0, _battery(b.x))["passed"]


def test_evolved_mass_is_integrated_mass(kern11):
    b = kern11.basis
    mu0 = point_mass(b.grid, 0.8, 0.4)
    out = evolve_measure(kern11, mu0, 1.5)
    assert b.grid.trapz(out) == pytest.approx(b.grid.trapz(mu0 * kern11.mass(1.5)), rel=1e-10)


def test_evolving_the_qsd_keeps_it(kern11):
    b = kern11.basis
    nu = build_qsd(b)
    np.testing.assert_allclose(conditional_evolution(kern11, nu.density, 2.0), nu.density, atol=1e-10)


def test_attraction_rate(kern10):
    b = kern10.basis
    nu = build_qsd(b)
    rep = attraction(kern10, nu, point_mass(b.grid, 2.0, 0.3), [1.0, 2.0, 4.0])
    assert rep.decreasing
    assert rep.relative_rate_error < 0.1
    fitted = rep.scale * np.exp(-rep.fitted_rate * rep.times)
    np.testing.assert_allclose(rep.tv, fitted, rtol=0.1)


def test_degenerate_evolution(kern10):
    g = kern10.basis.grid
    mu0 = np.zeros(g.n)
    mu0[0] = 1.0
    with pytest.raises(DegenerateEvolutionError):
        conditional_evolution(kern10, mu0, 1.0)


def test_point_mass_normalized(grid):
    f = point_mass(grid, 0.3)
    assert grid.trapz(f) == pytest.approx(1.0)
    assert grid.nodes[np.argmax(f)] == pytest.approx(0.3, abs=grid.h)


@settings(max_examples=30, deadline=None)
@given(m1=st.floats(-3, 3), m2=st.floats(-3, 3), w=st.floats(0.2, 2))
def test_tv_is_a_metric_on_densities(grid, m1, m2, w):
    f, g = point_mass(grid, m1, w), point_mass(grid, m2, w)
    d = tv_distance(grid, f, g)
    assert 0 <= d <= 1 + 1e-12
    assert d == pytest.approx(tv_distance(grid, g, f))
    exact = math.erf(abs(m1 - m2) / (2 * math.sqrt(2) * w))
    # the kink of |f - g| limits the trapezoid rule to O(h^2)
    assert d == pytest.approx(exact, abs=1e-5)
