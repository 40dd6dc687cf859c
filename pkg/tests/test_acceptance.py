"""Acceptance criteria 1 to 10. Each test prints one PASS/FAIL line; a summary is repeated at the end of the run."""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

import conftest
from conftest import hermite_basis, oscillator_basis, solve
from fkspectral import hermite
from fkspectral.branching import estimate_mass, reversed_density_chain, reversed_spine_transition_check
from fkspectral.cli import _battery
from fkspectral.qprocess import build_q_model, check_q_limit, invariant_occupation_check
from fkspectral.qsd import attraction, build_qsd, check_qsd_fixed_point, point_mass
from fkspectral.rng import stream
from fkspectral.semigroup import KernelEvaluator
from fkspectral.spectral import check_decay_bound, check_derivative_bound, check_growth_bound, check_sup_bound

H10 = hermite.reduced_spec(hermite.HermiteModel(1.0, 0.0))


def report(n: int, ok: bool, detail: str, capsys) -> None:
    conftest.ACCEPTANCE[n] = (bool(ok), detail)
    with capsys.disabled():
        print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# --- shared Monte Carlo runs (reused by criterion 10) ---------------------------


@lru_cache(maxsize=None)
def kern(sigma=1.0, c=0.0):
    return KernelEvaluator(hermite_basis(sigma, c))


@lru_cache(maxsize=None)
def mc_mass(dt):
    est = estimate_mass(H10, 0.0, 3.0, dt, 10**5, seed=31)
    target = float(kern().mass(3.0, 0.0))
    return est, target


@lru_cache(maxsize=None)
def q_occupation(dt):
    model = build_q_model(hermite_basis(1.0, 0.0))
    return invariant_occupation_check(model, 1000.0, dt, 50.0, stream(83, 0), n_paths=32)


@lru_cache(maxsize=None)
def spine(dt):
    b = hermite_basis(1.0, 0.0)
    return reversed_spine_transition_check(H10, b, 2.0, 0.5, dt, 20000, seed=97, kern=kern(), short_lag=0.05,
                                           target_ess=2e4)


def _mass_ok(est, target):
    return abs(est.z_score(target)) <= 3


def _spine_ok(rep):
    return rep["ess"] >= 2e4 and rep["tv_marginal"] <= 0.05 and rep["tv_conditional"] <= 0.08


# --- criteria --------------------------------------------------------------------


def test_criterion_01_eigenvalues(capsys):
    worst, slowest = 0.0, 0.0
    for sigma in (0.5, 1.0, 2.0):
        start = time.perf_counter()
        b = solve(hermite.oscillator_spec(sigma))
        slowest = max(slowest, time.perf_counter() - start)
        k = np.arange(11)
        worst = max(worst, float(np.max(np.abs(b.lambdas[:11] / ((k + 0.5) / sigma) - 1))))
    ok = worst <= 1e-4 and slowest <= 30
    report(1, ok, f"max rel error {worst:.2e} (tol 1e-4), slowest solve {slowest:.1f} s (limit 30 s)", capsys)
    assert ok


def test_criterion_02_lambda0_literal(capsys):
    # the reference value is the literal expression 1 - c^2/2 - sigma/2
    rows, ok = [], True
    for sigma, c in ((1.0, 0.0), (1.0, 1.0), (2.0, 1.0)):
        lam0 = float(hermite_basis(sigma, c).lambdas[0])
        literal = 1 - c * c / 2 - sigma / 2
        good = abs(lam0 - literal) <= 1e-4
        ok &= good
        rows.append(f"({sigma:g},{c:g}): numeric {lam0:+.6f} vs {literal:+.6f} {'ok' if good else 'MISMATCH'}"
                    f" (|numeric + literal| = {abs(lam0 + literal):.1e})")
    report(2, ok, "; ".join(rows), capsys)
    assert ok


def test_criterion_03_mass_asymptotics(capsys):
    k = kern()
    scaled = math.exp(k.basis.lambdas[0] * 6.0) * float(k.mass(6.0, 0.0))
    rel = abs(scaled / math.sqrt(2) - 1)
    est, target = mc_mass(1e-2)
    ok = rel <= 5e-3 and _mass_ok(est, target)
    report(3, ok, f"e^(lambda0 6) m_6(0) = {scaled:.6f} (rel err {rel:.1e}); MC m_3(0) = {est.estimate:.4f} "
           f"+- {est.stderr:.4f} vs kernel {target:.4f} (z = {est.z_score(target):+.2f})", capsys)
    assert ok


def test_criterion_04_spectral_gap(capsys):
    # c = 1: g has a nonzero Theta_1 component, so lambda_1 - lambda_0 = 1 is the asymptotic rate
    k1 = kern(1.0, 1.0)
    b = k1.basis
    g = np.exp(np.abs(b.x) / 2)
    rep = k1.gap_decay(g, 0.5, np.linspace(1, 4, 13))
    even = kern(1.0, 0.0).gap_decay(np.exp(np.abs(b.x) / 2), 0.5, np.linspace(1, 4, 13))
    late = k1.gap_decay(g, 0.5, np.linspace(8, 12, 9))
    ok = rep.relative_rate_error <= 0.05 and rep.bound_holds
    report(4, ok, f"c=1 fitted rate on [1,4] {rep.fitted_rate:.3f} vs {rep.expected_rate:.3f} "
           f"(rel err {rep.relative_rate_error:.2f}, tol 0.05); D bound holds: {rep.bound_holds} "
           f"(log D = {rep.log_D:.1f}); rate on [8,12] {late.fitted_rate:.3f}; c=0 rate {even.fitted_rate:.3f}",
           capsys)
    assert ok


def test_criterion_05_qsd(capsys):
    worst = 0.0
    for c in (0.0, 1.0):
        k = kern(1.0, c)
        nu = build_qsd(k.basis)
        fns = _battery(k.basis.x)
        assert len(fns) == 20
        for t in (0.5, 1.0, 3.0):
            worst = max(worst, check_qsd_fixed_point(nu, k, t, fns)["max_residual"])
    k = kern()
    nu = build_qsd(k.basis)
    att = attraction(k, nu, point_mass(k.basis.grid, 2.0, 0.3), [1.0, 2.0, 4.0])
    ok = worst <= 1e-6 and att.relative_rate_error <= 0.1 and att.decreasing
    report(5, ok, f"fixed-point max residual {worst:.1e} (tol 1e-6); attraction rate {att.fitted_rate:.3f} vs "
           f"{att.expected_rate:.3f} (rel err {att.relative_rate_error:.3f}, tol 0.1)", capsys)
    assert ok


def test_criterion_06_eigenfunction_bounds(capsys):
    failures = []
    bases = {f"osc{s:g}": oscillator_basis(s) for s in (0.5, 1.0, 2.0)}
    bases.update({f"h({s:g},{c:g})": hermite_basis(s, c) for s, c in ((1.0, 0.0), (1.0, 1.0), (2.0, 1.0))})
    n_growth = 0
    for name, b in bases.items():
        if not check_sup_bound(b).passed:
            failures.append(f"{name} sup")
        if name.startswith("osc"):
            sigma = b.meta.get("sigma", None) or float(name[3:])
            if not check_sup_bound(b, sharper=(math.pi * sigma) ** -0.25, rtol=1e-9).passed:
                failures.append(f"{name} Cramer")
        for R in (0.5, 1.0, 2.0):
            if not check_decay_bound(b, R).passed:
                failures.append(f"{name} decay R={R}")
        g = check_growth_bound(b)
        rows = [r for r in g.rows if r["k"] <= 30 and r["applicable"]]
        n_growth += len(rows)
        if any(r["margin"] < 0 for r in rows):
            failures.append(f"{name} growth")
        d = check_derivative_bound(b, k_max=20)
        if not d.passed or d.notes:
            failures.append(f"{name} derivative")
    ok = not failures
    report(6, ok, f"{len(bases)} bases, {n_growth} applicable growth rows; failures: {failures or 'none'}", capsys)
    assert ok


def test_criterion_07_heat_equation(capsys):
    k = kern()
    rng = np.random.default_rng(2024)
    triples = [(rng.uniform(0.5, 2), rng.uniform(-3, 3), rng.uniform(-3, 3)) for _ in range(50)]

    def residuals(d):
        out = []
        for t, x, y in triples:
            r = k.heat_residual(t, x, y, d, d)
            out.append(max(r.backward, r.forward))
        return np.array(out)

    r1, r2 = residuals(1e-3), residuals(5e-4)
    ratio = r1.sum() / r2.sum()
    ok = r1.max() <= 1e-4 and 3.5 <= ratio <= 4.5
    report(7, ok, f"max residual {r1.max():.1e} at dt=dh=1e-3 (tol 1e-4); halving ratio {ratio:.2f} "
           f"(median per triple {np.median(r1 / r2):.2f})", capsys)
    assert ok


def test_criterion_08_q_process(capsys):
    k1 = kern(1.0, 1.0)
    x = k1.basis.x
    rates = [check_q_limit(k1, 0.5, 1.0, [4.0, 6.0, 8.0, 10.0], f)["fitted_rate"] for f in (np.tanh(x), np.exp(-x * x))]
    rel = max(abs(r - 1.0) for r in rates)
    occ = q_occupation(1e-2)
    ok = rel <= 0.1 and occ["ks"] <= 0.02
    report(8, ok, f"kernel-ratio rates {rates[0]:.3f}, {rates[1]:.3f} vs 1 (tol 10%); KS to Psi_0^2 {occ['ks']:.4f} "
           f"(tol 0.02, {occ['n_samples']} samples; against Psi_0 instead {occ['ks_unsquared']:.3f})", capsys)
    assert ok


def test_criterion_09_spine_reversal(capsys):
    rep = spine(1e-2)
    ch = reversed_density_chain(kern(), 2.0, 0.5, 0.75, 0.3, np.linspace(-3, 3, 13))
    ok = _spine_ok(rep) and ch["max_gap"] <= 1e-8
    report(9, ok, f"ESS {rep['ess']:.0f} from {rep['reps']} trees; TV marginal {rep['tv_marginal']:.4f} (tol 0.05); "
           f"TV conditional {rep['tv_conditional']:.4f} (tol 0.08); identity chain gap {ch['max_gap']:.1e} (tol 1e-8)",
           capsys)
    assert ok


@pytest.mark.slow
def test_criterion_10_dt_halving(capsys):
    parts, ok = [], True
    for dt in (1e-2, 5e-3):
        est, target = mc_mass(dt)
        occ = q_occupation(dt)
        sp = spine(dt)
        good = _mass_ok(est, target) and occ["ks"] <= 0.02 and _spine_ok(sp)
        ok &= good
        parts.append(f"dt={dt:g}: mass z {est.z_score(target):+.2f}, KS {occ['ks']:.4f}, "
                     f"TV {sp['tv_marginal']:.3f}/{sp['tv_conditional']:.3f}")
    report(10, ok, "; ".join(parts), capsys)
    assert ok
