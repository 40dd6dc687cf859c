import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from fkspectral import hermite
from fkspectral.branching import (
    NumericalError,
    estimate_linear_functionals,
    estimate_mass,
    feynman_kac_mc,
    grid_sampler,
    ratio_limit_estimate,
    ratio_of_means_estimate,
    reversed_density_chain,
    reversed_spine_transition_check,
    run_trees,
    sample_spines,
    simulate_population,
)
from fkspectral.model import ModelSpec
from fkspectral.qsd import build_qsd
from fkspectral.rng import stream

H10 = hermite.reduced_spec(hermite.HermiteModel(1.0, 0.0))
H11 = hermite.reduced_spec(hermite.HermiteModel(1.0, 1.0))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_genealogy_invariants(seed):
    tree = simulate_population(H10, 0.0, 1.5, 1e-2, stream(seed, 0), rng_seed=seed)
    n = tree.n_individuals
    assert np.all(tree.parent[1:] < np.arange(1, n)) and tree.parent[0] == -1
    for i in range(1, n):
        p = tree.parent[i]
        assert tree.birth_step[p] < tree.birth_step[i]
        assert tree.death_step[p] < 0 or tree.death_step[p] > tree.birth_step[i]
    for step in range(0, len(tree.history), 10):
        assert tree.alive_at(step * tree.dt) == tree.live_counts[step]
    assert tree.n_T == tree.live_counts[-1] == tree.alive_at(1.5)
    for i in tree.alive_ids()[:3]:
        path = tree.ancestral_path(int(i))
        assert path.traits[0] == 0.0 and path.traits.size == len(tree.history)
        assert path.reversed().traits[-1] == 0.0
        ind = tree.individual(int(i))
        assert ind.trajectory[-1] == path.traits[-1] and ind.death_time == math.inf


def test_population_reproducible_and_capped():
    a = simulate_population(H10, 0.0, 2.0, 1e-2, stream(7, 0))
    b = simulate_population(H10, 0.0, 2.0, 1e-2, stream(7, 0))
    np.testing.assert_array_equal(a.parent, b.parent)
    np.testing.assert_array_equal(a.history[-1][1], b.history[-1][1])
    grow = ModelSpec(a=lambda x: 0 * x, da=lambda x: 0 * x, V=lambda x: np.full(np.shape(x), 3.0),
                     b=lambda x: np.full(np.shape(x), 3.0), d=lambda x: np.zeros(np.shape(x)))
    assert simulate_population(grow, 0.0, 5.0, 1e-2, stream(1, 0), cap=500).truncated


def test_parameter_errors():
    with pytest.raises(ValueError):
        simulate_population(H10, 0.0, 1.0, 2e-2, stream(0, 0))
    with pytest.raises(ValueError):
        simulate_population(H10, 0.0, 1.005, 1e-2, stream(0, 0))
    with pytest.raises(ValueError):
        estimate_mass(H10, 0.0, 1.0, 1e-2, 50, 0)
    no_rates = hermite.oscillator_spec(1.0)
    with pytest.raises(ValueError):
        estimate_mass(no_rates, 0.0, 1.0, 1e-2, 100, 0)
    fast = ModelSpec(a=lambda x: 0 * x, da=lambda x: 0 * x, V=lambda x: np.full(np.shape(x), 100.0),
                     b=lambda x: np.full(np.shape(x), 100.0), d=lambda x: np.zeros(np.shape(x)))
    with pytest.raises(ValueError):
        estimate_mass(fast, 0.0, 0.1, 1e-2, 100, 0)
    with pytest.raises(ValueError):
        stream(-1)


def test_nan_rates_raise():
    bad = ModelSpec(a=lambda x: 0 * x, da=lambda x: 0 * x, V=lambda x: 0 * x,
                    b=lambda x: np.where(x > 0.5, np.nan, 1.0), d=lambda x: np.ones_like(x))
    with pytest.raises(NumericalError):
        estimate_mass(bad, 0.0, 2.0, 1e-2, 200, 0)
    nan_drift = ModelSpec(a=lambda x: np.where(x > 0.5, np.nan, 0.0), da=lambda x: 0 * x, V=lambda x: 0 * x,
                          b=lambda x: np.ones_like(x), d=lambda x: np.ones_like(x))
    with pytest.raises(NumericalError):
        estimate_mass(nan_drift, 0.0, 2.0, 1e-2, 200, 0)


def test_streams_are_per_chunk():
    a = run_trees(H10, 0.0, 0.5, 1e-2, 9000, 11, phis=[np.ones_like])
    b = run_trees(H10, 0.0, 0.5, 1e-2, 9000, 11, phis=[np.ones_like])
    np.testing.assert_array_equal(np.concatenate([c.n_T for c in a]), np.concatenate([c.n_T for c in b]))
    # the second chunk of one run is the first chunk of a run offset by one
    c = run_trees(H10, 0.0, 0.5, 1e-2, 808, 11, phis=[np.ones_like], first_chunk=1)
    np.testing.assert_array_equal(a[1].n_T, c[0].n_T)
    assert not np.array_equal(a[0].n_T[:808], c[0].n_T)


def test_mean_mass_matches_kernel(kern11):
    est = estimate_mass(H11, 0.3, 1.0, 1e-2, 20000, 5)
    assert abs(est.z_score(float(kern11.mass(1.0, 0.3)))) < 4
    d = est.to_dict()
    assert d["n_used"] == 20000 and 0 < d["extinct_fraction"] < 1


def test_linear_functionals_match_kernel(kern10):
    b = kern10.basis
    phis = [lambda x: x * x, lambda x: np.exp(-x * x), lambda x: np.tanh(x) + 1]
    ests = estimate_linear_functionals(H10, phis, 0.5, 1.0, 1e-2, 20000, 6)
    for f, est in zip(phis, ests):
        assert abs(est.z_score(float(kern10.apply_Pt(f(b.x), 1.0, 0.5)))) < 4


def test_feynman_kac_single_path(kern11):
    est = feynman_kac_mc(H11, np.cos, 0.2, 1.0, 1e-2, 40000, 3)
    ref = float(kern11.apply_Pt(np.cos(kern11.basis.x), 1.0, 0.2))
    assert abs(est.z_score(ref)) < 4


def test_ratio_of_means_tends_to_qsd(kern10):
    b = kern10.basis
    T = 4.0
    ref = float(kern10.apply_Pt(b.x**2, T, 0.0) / kern10.mass(T, 0.0))
    est = ratio_of_means_estimate(H10, lambda x: x * x, 0.0, T, 1e-2, 20000, 8)
    assert abs(est.z_score(ref)) < 4
    assert ref == pytest.approx(build_qsd(b).integrate(b.x**2), rel=0.01)


def test_per_tree_ratio_runs():
    # the per-tree average of sum phi / N_T is biased at finite T; only sanity is checked here
    est = ratio_limit_estimate(H10, lambda x: x * x, 0.0, 2.0, 1e-2, 2000, 9)
    assert 0.5 < est.estimate < 1.5 and est.n_used < 2000


def test_spine_sample_structure():
    s = sample_spines(H10, 0.0, 1.0, 1e-2, 3000, 4)
    assert np.allclose(s.times, np.arange(11) * 0.1)
    assert np.all(s.traits[:, 0] == 0.0)
    assert np.all(s.weights >= 1) and s.ess <= len(s)
    assert len(s.paths()) == len(s)


def test_grid_sampler(grid, basis10):
    nu = build_qsd(basis10)
    draws = grid_sampler(grid, nu.density)(stream(0, 0), 20000)
    assert kstest(draws, "norm", args=(0, 1)).pvalue > 1e-3


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_reversal_identity_chain(request, c):
    kern = request.getfixturevalue("kern10" if c == 0 else "kern11")
    ch = reversed_density_chain(kern, 2.0, 0.5, 0.7, 0.3, np.linspace(-3, 3, 13))
    assert ch["max_gap"] < 1e-8
    with pytest.raises(ValueError):
        reversed_density_chain(kern, 1.0, 0.5, 0.7, 0.0, [0.0])


def test_reversed_spine_small_run(basis10, kern10):
    rep = reversed_spine_transition_check(H10, basis10, 2.0, 0.5, 1e-2, 8000, 2, kern=kern10, short_lag=0.05)
    assert rep["conclusive"] and rep["ess"] > 2000
    assert rep["tv_marginal"] < 0.08 and rep["tv_conditional"] < 0.12
    assert rep["short_lag_variance"] == pytest.approx(0.05, rel=0.15)
    assert rep["start_mass"] == pytest.approx(1.0, abs=1e-8)
