"""Quasi-stationary distribution: construction, fixed-point identity and domain of attraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .semigroup import KernelEvaluator, _as_grid_function


class DegenerateEvolutionError(ArithmeticError):
    """The evolved measure has (numerically) no mass left to renormalize."""


@dataclass(frozen=True)
class QsdMeasure:
    grid: Grid
    density: np.ndarray
    Z: float

    def integrate(self, phi) -> float:
        return float(self.grid.trapz(self.density * phi))

    def mean(self) -> float:
        return self.integrate(self.grid.nodes)


def build_qsd(basis) -> QsdMeasure:
    """nu = Theta_0 e^{-2l} / Z with Z = int Theta_0 e^{-2l}."""
    if np.any(basis.psis[0][1:-1] <= 0):
        raise ValueError("Psi_0 is not positive on the interior: basis is inconsistent")
    w = basis.thetas[0] * np.exp(-2 * basis.ell_values)
    Z = float(basis.grid.trapz(w))
    return QsdMeasure(basis.grid, w / Z, Z)


def tv_distance(grid: Grid, mu, nu) -> float:
    """Half the L^1 distance between two grid densities."""
    return 0.5 * float(grid.trapz(np.abs(np.asarray(mu) - np.asarray(nu))))


def point_mass(grid: Grid, x0: float, width: float | None = None) -> np.ndarray:
    """Narrow Gaussian stand-in for a Dirac mass (default width 3h), normalized on the grid."""
    width = 3 * grid.h if width is None else width
    f = np.exp(-0.5 * ((grid.nodes - x0) / width) ** 2)
    return f / grid.trapz(f)


def fixed_point_residuals(kern: KernelEvaluator, density, t: float, test_functions) -> np.ndarray:
    """|int P_t phi dmu - e^{-lambda_0 t} int phi dmu| / ||phi||_inf for each phi."""
    b = kern.basis
    grid = b.grid
    density = np.asarray(density, dtype=float)
    decay = math.exp(-b.lambdas[0] * t)
    out = []
    for phi in test_functions:
        phi = _as_grid_function(b, phi)
        lhs = grid.trapz(kern.apply_Pt(phi, t) * density)
        rhs = decay * grid.trapz(phi * density)
        out.append(abs(lhs - rhs) / max(np.abs(phi).max(), 1e-300))
    return np.array(out)


def check_qsd_fixed_point(nu: QsdMeasure, kern: KernelEvaluator, t: float, test_functions, tol: float = 1e-6) -> dict:
    """Both forms of the QSD identity: the eigen form and the ratio form int P_t phi / int P_t 1."""
    b = kern.basis
    grid = nu.grid
    res = fixed_point_residuals(kern, nu.density, t, test_functions)
    mass = grid.trapz(kern.mass(t) * nu.density)
    ratio_err = []
    for phi in test_functions:
        phi = _as_grid_function(b, phi)
        ratio = grid.trapz(kern.apply_Pt(phi, t) * nu.density) / mass
        ratio_err.append(abs(ratio - nu.integrate(phi)) / max(np.abs(phi).max(), 1e-300))
    ratio_err = np.array(ratio_err)
    return {
        "t": float(t),
        "eigen_residuals": res.tolist(),
        "ratio_residuals": ratio_err.tolist(),
        "max_residual": float(max(res.max(), ratio_err.max())),
        "tol": tol,
        "passed": bool(res.max() <= tol and ratio_err.max() <= tol),
    }


def evolve_measure(kern: KernelEvaluator, mu0, t: float) -> np.ndarray:
    """y -> int mu0(x) p(t, x, y) dx on the grid (left action, coefficient space)."""
    b = kern.basis
    t = kern._check_t(t)
    mu0 = _as_grid_function(b, mu0)
    coeffs = b.psis @ (mu0 * np.exp(b.ell_values) * b.grid.weights)
    return np.exp(-b.ell_values) * ((coeffs * np.exp(-b.lambdas * t)) @ b.psis)


def conditional_evolution(kern: KernelEvaluator, mu0, t: float) -> np.ndarray:
    """Law at time t conditioned on survival: int p(t,x,.) mu0(dx), renormalized to mass 1."""
    out = evolve_measure(kern, mu0, t)
    total = kern.basis.grid.trapz(out)
    if not total > kern.tail_tol:
        raise DegenerateEvolutionError(f"evolved mass {total:.3e} is below tail_tol")
    return out / total


@dataclass
class AttractionReport:
    times: np.ndarray
    tv: np.ndarray
    fitted_rate: float
    expected_rate: float
    scale: float

    @property
    def relative_rate_error(self) -> float:
        return abs(self.fitted_rate / self.expected_rate - 1.0)

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.tv) < 0))

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "tv": self.tv.tolist(),
            "fitted_rate": self.fitted_rate,
            "expected_rate": self.expected_rate,
            "relative_rate_error": self.relative_rate_error,
            "scale": self.scale,
            "decreasing": self.decreasing,
        }


def attraction(kern: KernelEvaluator, nu: QsdMeasure, mu0, times) -> AttractionReport:
    """TV distance of the conditioned evolution to nu, with a log-linear rate fit."""
    times = np.asarray(times, dtype=float)
    tv = np.array([tv_distance(nu.grid, conditional_evolution(kern, mu0, t), nu.density) for t in times])
    slope, intercept = np.polyfit(times, np.log(tv), 1)
    b = kern.basis
    return AttractionReport(times, tv, float(-slope), float(b.lambdas[1] - b.lambdas[0]), float(math.exp(intercept)))
