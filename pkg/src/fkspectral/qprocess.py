"""The process conditioned to survive forever: its kernel, SDE and invariant law Psi_0^2 dx."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import kstest

from .semigroup import KernelEvaluator, _as_grid_function
from .spectral import SpectralBasis


@dataclass(frozen=True)
class QProcessModel:
    basis: SpectralBasis
    drift_values: np.ndarray
    sde_clip: float = 50.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.drift_values[1:-1])):
            raise ValueError("Q drift is not finite on the interior")
        object.__setattr__(self, "_spline", CubicSpline(self.basis.x, self.drift_values))

    @property
    def wall(self) -> float:
        g = self.basis.grid
        return g.L - 5 * g.h

    def drift(self, y):
        return np.clip(self._spline(y), -self.sde_clip, self.sde_clip)


def build_q_model(basis: SpectralBasis, sde_clip: float = 50.0, drift=None) -> QProcessModel:
    """Q-process with drift Psi_0'/Psi_0 from the basis, or from a callable ``drift``."""
    if drift is not None:
        values = np.asarray(drift(basis.x), dtype=float)
    else:
        psi0 = basis.psis[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            values = basis.dpsis[0] / psi0
        # walls carry Psi_0 = 0; continue the neighbouring slope there
        values[0], values[-1] = values[1], values[-2]
    values = np.clip(values, -sde_clip, sde_clip)
    return QProcessModel(basis, values, sde_clip)


def kernel_q(kern: KernelEvaluator, t, x, y):
    """q(t, x, y) = e^{lambda_0 t} Psi_0(y) / Psi_0(x) ptilde(t, x, y)."""
    return kern.kernel_q(t, x, y)


@dataclass
class QPath:
    times: np.ndarray
    traits: np.ndarray  # (n_paths, n_records)
    boundary_events: int
    dt: float


def simulate_q(model: QProcessModel, x0, T: float, dt: float, rng: np.random.Generator,
               n_paths: int = 1, record_every: float | None = None) -> QPath:
    """Euler-Maruyama for dY = dB + drift(Y) dt with reflection at +-(L - 5h).

    Records every ``record_every`` time units (every step when None). Several
    independent paths are advanced together when ``n_paths > 1``.
    """
    wall = model.wall
    x0 = float(x0)
    if abs(x0) >= model.basis.grid.L:
        raise ValueError("x0 must lie strictly inside the box")
    n_steps = int(round(T / dt))
    stride = 1 if record_every is None else max(1, int(round(record_every / dt)))
    y = np.full(n_paths, min(max(x0, -wall), wall))
    n_rec = n_steps // stride + 1
    rec = np.empty((n_paths, n_rec))
    rec[:, 0] = y
    sq = math.sqrt(dt)
    events = 0
    r = 1
    for step in range(1, n_steps + 1):
        y = y + model.drift(y) * dt + sq * rng.standard_normal(n_paths)
        out = np.abs(y) > wall
        if out.any():
            events += int(out.sum())
            y[out] = np.sign(y[out]) * (2 * wall - np.abs(y[out]))
            np.clip(y, -wall, wall, out=y)
        if step % stride == 0:
            rec[:, r] = y
            r += 1
    times = np.arange(n_rec) * stride * dt
    return QPath(times, rec[:, :r], events, dt)


def _grid_cdf(basis: SpectralBasis, density):
    cdf = basis.grid.cumtrapz(density)
    cdf = cdf / cdf[-1]
    x = basis.x
    return lambda q: np.interp(q, x, cdf)


def invariant_occupation_check(model: QProcessModel, T: float, dt: float, burn_in: float,
                               rng: np.random.Generator, n_paths: int = 32, x0: float = 0.0,
                               subsample: float = 1.0, tol: float = 0.02) -> dict:
    """KS distance between post-burn-in occupation samples and Psi_0^2 dx.

    Samples are taken every ``subsample`` time units on each of ``n_paths``
    independent paths. The same samples are also compared with the normalized
    Psi_0 dx, which a correct simulation should not match.
    """
    if T - burn_in < 100:
        raise ValueError("need at least 100 time units after burn-in")
    path = simulate_q(model, x0, T, dt, rng, n_paths=n_paths, record_every=subsample)
    keep = path.times >= burn_in
    samples = path.traits[:, keep].ravel()
    b = model.basis
    target = kstest(samples, _grid_cdf(b, b.psis[0] ** 2))
    wrong = kstest(samples, _grid_cdf(b, np.abs(b.psis[0])))
    return {
        "ks": float(target.statistic),
        "p_value": float(target.pvalue),
        "ks_unsquared": float(wrong.statistic),
        "n_samples": int(samples.size),
        "n_paths": n_paths,
        "T": T,
        "dt": dt,
        "burn_in": burn_in,
        "boundary_events": path.boundary_events,
        "mean": float(samples.mean()),
        "var": float(samples.var()),
        "tol": tol,
        "passed": bool(target.statistic <= tol),
        "samples": samples,
    }


def q_expectation(kern: KernelEvaluator, s: float, x: float, phi) -> float:
    """Q_s phi (x) = int q(s, x, z) phi(z) dz."""
    b = kern.basis
    phi = _as_grid_function(b, phi)
    return float(b.grid.trapz(kern.kernel_q(s, x, b.x) * phi))


def conditioned_ratio(kern: KernelEvaluator, s: float, t: float, x: float, phi) -> float:
    """E_x[e^{int_0^t V} phi(X_s)] / E_x[e^{int_0^t V}] via kernels."""
    b = kern.basis
    phi = _as_grid_function(b, phi)
    ps = kern.kernel_p(s, x, b.x)
    m = kern.mass(t - s)
    return float(b.grid.trapz(ps * phi * m) / b.grid.trapz(ps * m))


def check_q_limit(kern: KernelEvaluator, x: float, s: float, t_values, phi) -> dict:
    """Convergence of the survival-conditioned ratio to Q_s phi (x), with a fitted exponential rate."""
    t_values = np.asarray(t_values, dtype=float)
    if s >= t_values.min():
        raise ValueError("s must be smaller than every t")
    target = q_expectation(kern, s, x, phi)
    ratios = np.array([conditioned_ratio(kern, s, t, x, phi) for t in t_values])
    errors = np.abs(ratios - target)
    floor = 1e-12 * max(1.0, abs(target))
    use = errors > floor
    rate = float(-np.polyfit(t_values[use], np.log(errors[use]), 1)[0]) if use.sum() >= 2 else float("nan")
    b = kern.basis
    return {
        "x": x,
        "s": s,
        "t_values": t_values.tolist(),
        "ratios": ratios.tolist(),
        "target": target,
        "errors": errors.tolist(),
        "fitted_rate": rate,
        "expected_rate": float(b.lambdas[1] - b.lambdas[0]),
    }
