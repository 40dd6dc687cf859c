"""Closed-form oracle for V(y) = 1 - y^2/2 with motion dY = sigma (dB - c dt).

Two coordinate pictures appear here. The original trait y has diffusion
coefficient sigma. The reduced trait x = y / sigma has unit diffusion, drift
a = c and potential W(x) = 1 - sigma^2 x^2 / 2, so l(x) = c x in reduced
coordinates and l(y) = c y / sigma in original ones. Densities transport as
f_Y(y) = f_X(y / sigma) / sigma.

A third object, the "R-generator" 1/2 d^2 - x^2 / (2 sigma^2), is the
harmonic oscillator whose spectrum (k + 1/2) / sigma is the textbook one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec

MAX_DEGREE = 170


@dataclass(frozen=True)
class HermiteModel:
    sigma: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def hermite_poly(k: int, x):
    """Physicists' Hermite polynomial H_k by the three-term recurrence."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if k > MAX_DEGREE:
        raise OverflowError(f"degree {k} exceeds {MAX_DEGREE}: normalizers overflow")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), 2.0 * x
    if k == 0:
        return h_prev
    for j in range(1, k):
        h_prev, h = h, 2.0 * x * h - 2.0 * j * h_prev
    return h


def hermite_functions(K: int, x):
    """Orthonormal Hermite functions h_0..h_{K-1} at x (unit frequency), stable recurrence."""
    if K > MAX_DEGREE + 1:
        raise OverflowError(f"degree {K - 1} exceeds {MAX_DEGREE}")
    x = np.asarray(x, dtype=float)
    out = np.empty((K,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if K > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(2, K):
        out[k] = math.sqrt(2.0 / k) * x * out[k - 1] - math.sqrt((k - 1) / k) * out[k - 2]
    return out


def log_norm_constant(sigma: float, k: int) -> float:
    """log C_k with C_k = sigma^(-1/4) / sqrt(2^k k! sqrt(pi)), via log-gamma."""
    if k > MAX_DEGREE:
        raise OverflowError(f"degree {k} exceeds {MAX_DEGREE}")
    return -0.25 * math.log(sigma) - 0.5 * (k * math.log(2.0) + math.lgamma(k + 1) + 0.5 * math.log(math.pi))


def closed_eigen(model: HermiteModel, k: int):
    """Eigenpair of 1/2 d^2 - x^2/(2 sigma^2): ((k + 1/2)/sigma, Psi_k)."""
    s = model.sigma
    logC = log_norm_constant(s, k)

    def psi(x):
        x = np.asarray(x, dtype=float)
        return math.exp(logC) * hermite_poly(k, x / math.sqrt(s)) * np.exp(-x * x / (2 * s))

    return (k + 0.5) / s, psi


def closed_eigen_reduced(model: HermiteModel, k: int):
    """Eigenpair of the reduced problem 1/2 d^2 + tildeV with tildeV = 1 - c^2/2 - sigma^2 x^2/2.

    The reduced eigenfunction is sqrt(sigma) Psi^R_k(sigma x), and the
    eigenvalue is sigma (k + 1/2) - 1 + c^2/2.
    """
    s = model.sigma
    _, psi_r = closed_eigen(model, k)
    lam = s * (k + 0.5) - 1.0 + 0.5 * model.c**2

    def psi(x):
        return math.sqrt(s) * psi_r(s * np.asarray(x, dtype=float))

    return lam, psi


def closed_lambda0_original(model: HermiteModel) -> float:
    """lambda_0 with P_t Theta_0 = e^{-lambda_0 t} Theta_0: sigma/2 + c^2/2 - 1.

    The value is invariant under the change of coordinates. Negative means the
    expected population grows.
    """
    return 0.5 * model.sigma + 0.5 * model.c**2 - 1.0


def closed_growth_rate(model: HermiteModel) -> float:
    """Exponential growth rate of the expected mass, 1 - c^2/2 - sigma/2 (equal to -lambda_0)."""
    return 1.0 - 0.5 * model.c**2 - 0.5 * model.sigma


def regime(model: HermiteModel, atol: float = 1e-12) -> str:
    lam0 = closed_lambda0_original(model)
    if abs(lam0) <= atol:
        return "critical"
    return "supercritical" if lam0 < 0 else "subcritical"


def closed_theta0(model: HermiteModel, y):
    """Theta_0 in original coordinates, normalized in L^2(e^{-2 l(y)} dy) with l(y) = c y / sigma."""
    s, c = model.sigma, model.c
    y = np.asarray(y, dtype=float)
    return math.exp(c * c / (2 * s)) * np.exp(-((y - c) ** 2) / (2 * s)) / (math.pi * s) ** 0.25


def closed_qsd(model: HermiteModel, y):
    """Quasi-stationary density: Gaussian with mean -c and variance sigma."""
    s, c = model.sigma, model.c
    y = np.asarray(y, dtype=float)
    return np.exp(-((y + c) ** 2) / (2 * s)) / math.sqrt(2 * math.pi * s)


def closed_mass_limit(model: HermiteModel, y):
    """lim e^{lambda_0 t} m_t(y) = sqrt(2) e^{c^2/sigma} e^{-(y - c)^2 / (2 sigma)}."""
    s, c = model.sigma, model.c
    y = np.asarray(y, dtype=float)
    return math.sqrt(2.0) * math.exp(c * c / s) * np.exp(-((y - c) ** 2) / (2 * s))


def closed_ell(model: HermiteModel, y):
    """l in original coordinates, c y / sigma."""
    return model.c * np.asarray(y, dtype=float) / model.sigma


def closed_q_params(model: HermiteModel) -> tuple[float, float, float]:
    """(relaxation rate, diffusion coefficient, stationary variance) of dY = -sigma Y dt + sigma dB."""
    s = model.sigma
    return s, s, s * s / (2 * s)


def closed_q_drift(model: HermiteModel, y):
    """Q-process drift in original coordinates, -sigma y."""
    return -model.sigma * np.asarray(y, dtype=float)


def closed_psi0_squared(model: HermiteModel, y):
    """Invariant density of the Q-process in original coordinates, N(0, sigma/2)."""
    s = model.sigma
    y = np.asarray(y, dtype=float)
    return np.exp(-y * y / s) / math.sqrt(math.pi * s)


def h4_x0(sigma: float, E: float = 1.0) -> float:
    """Smallest r with 1 - sigma^2 r^2 / 2 <= -E r."""
    return (E + math.sqrt(E * E + 2 * sigma**2)) / sigma**2


def reduced_spec(model: HermiteModel) -> ModelSpec:
    """Unit-diffusion model: a = c, V = 1 - sigma^2 x^2/2, b = 1, d = sigma^2 x^2 / 2."""
    s, c = model.sigma, model.c
    return ModelSpec(
        a=lambda x: np.full(np.shape(x), c, dtype=float),
        da=lambda x: np.zeros(np.shape(x)),
        V=lambda x: 1.0 - 0.5 * s * s * np.asarray(x, dtype=float) ** 2,
        b=lambda x: np.ones(np.shape(x)),
        d=lambda x: 0.5 * s * s * np.asarray(x, dtype=float) ** 2,
        beta=abs(c),
        gamma=0.0,
        E_const=1.0,
        x0=h4_x0(s),
        M_upper=-c * c,
        name="hermite",
        params={"sigma": s, "c": c},
    )


def oscillator_spec(sigma: float) -> ModelSpec:
    """Zero drift with V = -x^2 / (2 sigma^2): the R-generator as a model in its own right."""
    return ModelSpec(
        a=lambda x: np.zeros(np.shape(x)),
        da=lambda x: np.zeros(np.shape(x)),
        V=lambda x: -0.5 * np.asarray(x, dtype=float) ** 2 / sigma**2,
        E_const=1.0,
        x0=2.0 * sigma**2,
        name="oscillator",
        params={"sigma": sigma},
    )


# --- coordinate transport ---------------------------------------------------


def density_to_original(model: HermiteModel, density_reduced, y, interp):
    """Transport a reduced-coordinate density to original coordinates: f(y/sigma)/sigma.

    ``interp`` evaluates the reduced density at arbitrary points.
    """
    s = model.sigma
    return interp(density_reduced, np.asarray(y, dtype=float) / s) / s


def theta_to_original(model: HermiteModel, theta_reduced_at):
    """Theta^Y(y) = Theta^X(y/sigma)/sqrt(sigma), keeping the L^2(rho) normalization."""
    s = model.sigma
    return lambda y: theta_reduced_at(np.asarray(y, dtype=float) / s) / math.sqrt(s)
