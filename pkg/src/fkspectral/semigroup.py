"""Truncated eigenfunction series for the Feynman-Kac kernels and the semigroup action.

With Psi_k, lambda_k the reduced eigenpairs and l the drift primitive:

    ptilde(t, x, y) = sum_k e^{-lambda_k t} Psi_k(x) Psi_k(y)
    p(t, x, y)      = e^{l(x) - l(y)} ptilde        (density w.r.t. dy)
    r(t, x, y)      = e^{l(x) + l(y)} ptilde        (density w.r.t. e^{-2l(y)} dy)
    q(t, x, y)      = e^{lambda_0 t} Psi_0(y) / Psi_0(x) ptilde

Functions are applied in coefficient space: c_k = int Psi_k e^{-l} phi dy,
then P_t phi(x) = e^{l(x)} sum_k e^{-lambda_k t} c_k Psi_k(x).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .spectral import E_OVER_PI_QUARTER, SpectralBasis, growth_constant, log_C1

__all__ = [
    "KernelEvaluator",
    "GapReport",
    "HeatResidual",
    "TruncationWarning",
    "ConsistencyError",
    "OutOfSupportError",
    "log_D",
    "log_F",
]


class TruncationWarning(UserWarning):
    """The series tail cannot be certified below tail_tol with the available modes."""

    def __init__(self, message: str, bound: float | None = None, tail: float | None = None):
        super().__init__(message)
        self.bound = bound
        self.tail = tail


class ConsistencyError(ArithmeticError):
    """A truncated kernel value is negative beyond what the tail estimate explains."""


class OutOfSupportError(ValueError):
    """Psi_0 underflows at the requested start point."""


def _as_grid_function(basis: SpectralBasis, phi) -> np.ndarray:
    if callable(phi):
        phi = phi(basis.x)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0:
        phi = np.full(basis.grid.n, float(phi))
    if phi.shape[-1] != basis.grid.n:
        raise ValueError(f"function has {phi.shape[-1]} samples, grid has {basis.grid.n}")
    return phi


@dataclass
class GapReport:
    times: np.ndarray
    sup_errors: np.ndarray
    fitted_rate: float
    expected_rate: float
    A: float
    kappa: float
    log_D: float
    bound: np.ndarray
    saturated: np.ndarray
    burn_in: float

    @property
    def log_bound(self) -> np.ndarray:
        return math.log(self.A) + self.log_D - self.expected_rate * self.times

    @property
    def bound_holds(self) -> bool:
        # compared in log form: D(kappa) routinely exceeds the float range
        ok = ~self.saturated
        with np.errstate(divide="ignore"):
            return bool(np.all(np.log(self.sup_errors[ok]) <= self.log_bound[ok]))

    @property
    def relative_rate_error(self) -> float:
        return abs(self.fitted_rate / self.expected_rate - 1.0)

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "sup_errors": self.sup_errors.tolist(),
            "fitted_rate": self.fitted_rate,
            "expected_rate": self.expected_rate,
            "relative_rate_error": self.relative_rate_error,
            "A": self.A,
            "kappa": self.kappa,
            "log_D": self.log_D,
            "log_bound": self.log_bound.tolist(),
            "bound_holds": self.bound_holds,
            "saturated": self.saturated.tolist(),
            "burn_in": self.burn_in,
        }


@dataclass
class HeatResidual:
    """Residuals of d_t p = L_x p (backward) and d_t p = L*_y p (forward)."""

    backward: float
    forward: float
    value: float
    extras: dict = field(default_factory=dict)


def log_D(basis: SpectralBasis, kappa: float, E: float | None = None) -> float:
    """log of the constant D(kappa) controlling sup |e^{lambda_0 t} P_t g - Pi g| for |g| <= A e^{kappa|x|}.

    D = 2 e^{2 gamma} C1(kappa+beta+1) C1(beta+1) e^{lambda_1 (t1+t0)} sum_{k>=1} e^{-(lambda_k-lambda_1)(t1+t0)},
    t0 = 4(beta+1)/E, t1 = 4(kappa+beta+1)/E. The sum runs over the computed modes.
    """
    E = 2 * basis.tildeE if E is None else E
    beta, gamma = basis.beta, basis.gamma
    t0 = 4 * (beta + 1) / E
    t1 = 4 * (kappa + beta + 1) / E
    lc = lambda R: log_C1(R, basis.tildeA, basis.tildeE, basis.tilde_x0)  # noqa: E731
    lam = basis.lambdas
    s = t0 + t1
    tail = np.log(np.sum(np.exp(-(lam[1:] - lam[1]) * s)))
    return math.log(2.0) + 2 * gamma + lc(kappa + beta + 1) + lc(beta + 1) + lam[1] * s + tail


def log_F(basis: SpectralBasis, R_prime: float) -> tuple[float, float]:
    """(log F(R'), s0) for the bound p, r <= F e^{-lambda_0 (t - 2 s0)} e^{-R'(|x|+|y|)}, t > 3 s0."""
    R = R_prime + basis.beta
    s0 = 2 * R / basis.tildeE
    lam = basis.lambdas
    lc = log_C1(R, basis.tildeA, basis.tildeE, basis.tilde_x0)
    return 2 * basis.gamma + 2 * lc + math.log(np.sum(np.exp(-(lam - lam[0]) * s0))), s0


class KernelEvaluator:
    def __init__(self, basis: SpectralBasis, tail_tol: float = 1e-10):
        if tail_tol <= 0:
            raise ValueError("tail_tol must be positive")
        self.basis = basis
        self.tail_tol = tail_tol
        self.ell_values = basis.ell_values
        self._tail = lru_cache(maxsize=256)(self._tail_estimate)

    # --- truncation control -------------------------------------------------

    def _tail_estimate(self, t: float) -> float:
        """Upper estimate of sum_{k>=K} e^{-lambda_k t} sup|Psi_k|^2.

        Omitted eigenvalues are extrapolated at the proven k^(1/3) rate from
        the last computed one; sup|Psi_k|^2 uses the a priori sup bound.
        """
        b = self.basis
        K = b.K
        C = growth_constant(b.tilde_x0, b.tildeE)
        lamK = b.lambdas[-1]
        A = b.tildeA
        k0 = (K - 1) ** (1.0 / 3.0)

        def lam(k):
            return lamK + C * (k ** (1.0 / 3.0) - k0)

        def term(k):
            lk = lam(k)
            return math.exp(-lk * t) * E_OVER_PI_QUARTER**2 * math.sqrt(max(lk + A, 0.0))

        # substitute k = u^3 so the integrand decays exponentially in u
        val, _ = quad(lambda u: 3 * u * u * term(u**3), k0, np.inf, limit=200)
        return float(val)

    def tail_estimate(self, t: float) -> float:
        return self._tail(float(t))

    def _check_t(self, t) -> float:
        t = float(t)
        if not t > 0:
            raise ValueError(f"kernels are defined for t > 0, got t = {t}")
        tail = self.tail_estimate(t)
        if tail > self.tail_tol:
            bound = math.exp(self.basis.tildeA * t) / math.sqrt(2 * math.pi * t)
            warnings.warn(
                TruncationWarning(
                    f"series tail at t={t:g} estimated {tail:.2e} > tail_tol={self.tail_tol:.1e} with "
                    f"K={self.basis.K} modes; a priori bound on ptilde is {bound:.3e}",
                    bound=bound,
                    tail=tail,
                ),
                stacklevel=3,
            )
        return t

    def _clamp(self, values: np.ndarray, t: float) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        allow = max(self.tail_tol, self.tail_estimate(t))
        worst = values.min() if values.size else 0.0
        if worst < -allow:
            raise ConsistencyError(
                f"truncated kernel value {worst:.3e} is negative beyond tail allowance {allow:.1e}"
            )
        return np.maximum(values, 0.0)

    # --- point evaluation ---------------------------------------------------

    def _ptilde_raw(self, t: float, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        X = self.basis.modes_at(x)
        Y = self.basis.modes_at(y)
        w = np.exp(-self.basis.lambdas * t).reshape((-1,) + (1,) * x.ndim)
        return np.sum(w * X * Y, axis=0)

    def _ell(self, x):
        return self.basis.field_at("ell", x)

    def kernel_ptilde(self, t, x, y):
        t = self._check_t(t)
        return self._clamp(self._ptilde_raw(t, x, y), t)

    def kernel_p(self, t, x, y):
        return np.exp(self._ell(x) - self._ell(y)) * self.kernel_ptilde(t, x, y)

    def kernel_r(self, t, x, y):
        return np.exp(self._ell(x) + self._ell(y)) * self.kernel_ptilde(t, x, y)

    def kernel_q(self, t, x, y):
        t = float(t)
        psi0x = self.basis.modes_at(x)[0]
        if np.any(np.abs(psi0x) < 1e-300):
            raise OutOfSupportError("Psi_0 underflows at the start point; q is undefined there")
        psi0y = self.basis.modes_at(y)[0]
        return math.exp(self.basis.lambdas[0] * t) * psi0y / psi0x * self.kernel_ptilde(t, x, y)

    def kernel_matrix(self, t, xs, ys, kind: str = "p", clamp: bool = True) -> np.ndarray:
        """Dense kernel matrix K[i, j] = kind(t, xs[i], ys[j]).

        With ``clamp=False`` the raw truncated series is returned, including
        the small negative lobes that the clamped kernels set to zero.
        """
        t = self._check_t(t)
        b = self.basis
        X = b.modes_at(np.asarray(xs, dtype=float))
        Y = b.modes_at(np.asarray(ys, dtype=float))
        m = (X * np.exp(-b.lambdas * t)[:, None]).T @ Y
        if clamp:
            m = self._clamp(m, t)
        lx, ly = self._ell(xs), self._ell(ys)
        if kind == "ptilde":
            return m
        if kind == "p":
            return np.exp(lx[:, None] - ly[None, :]) * m
        if kind == "r":
            return np.exp(lx[:, None] + ly[None, :]) * m
        if kind == "q":
            return math.exp(b.lambdas[0] * t) * (Y[0][None, :] / X[0][:, None]) * m
        raise ValueError(f"unknown kernel kind {kind!r}")

    # --- coefficient space --------------------------------------------------

    def coefficients(self, phi, kappa: float | None = None) -> np.ndarray:
        """c_k = int Psi_k(y) e^{-l(y)} phi(y) dy for a grid function (or stack of them)."""
        b = self.basis
        phi = _as_grid_function(b, phi)
        if kappa is not None:
            self._check_growth(kappa)
        integrand = (phi * np.exp(-self.ell_values) * b.grid.weights).reshape(-1, b.grid.n)
        return (b.psis @ integrand.T).reshape((b.K,) + phi.shape[:-1])

    def _check_growth(self, kappa: float) -> None:
        b = self.basis
        r = np.abs(b.x)
        edge = r >= 0.9 * b.grid.L
        leak = np.abs(b.psis[:, edge]) * np.exp(b.gamma + (b.beta + kappa) * r[edge])
        if leak.max() > self.tail_tol:
            warnings.warn(
                TruncationWarning(
                    f"growth rate kappa={kappa:g} is not dominated by the computed modes near the box edge "
                    f"(edge weight {leak.max():.2e}); enlarge L"
                ),
                stacklevel=3,
            )

    def synthesize(self, coeffs: np.ndarray, t: float, x=None) -> np.ndarray:
        """e^{l(x)} sum_k e^{-lambda_k t} c_k Psi_k(x) on the grid (x=None) or at points."""
        b = self.basis
        w = np.exp(-b.lambdas * t)
        coeffs = np.asarray(coeffs, dtype=float)
        flat = coeffs.reshape(b.K, -1) * w[:, None]
        if x is None:
            out = flat.T @ b.psis * np.exp(self.ell_values)
            return out.reshape(coeffs.shape[1:] + (b.grid.n,))
        x = np.asarray(x, dtype=float)
        modes = b.modes_at(x).reshape(b.K, -1)
        out = (flat.T @ modes) * np.exp(self._ell(x)).reshape(1, -1)
        return out.reshape(coeffs.shape[1:] + x.shape)

    def apply_Pt(self, phi, t, x=None, kappa: float | None = None):
        """P_t phi at x (or on the whole grid when x is None)."""
        t = self._check_t(t)
        return self.synthesize(self.coefficients(phi, kappa), t, x)

    def mass(self, t, x=None):
        """m_t(x) = P_t 1 (x)."""
        return self.apply_Pt(1.0, t, x)

    def projection_Pi(self, g) -> np.ndarray:
        """Pi(g) = Theta_0 * int Theta_0 g e^{-2l} dy."""
        b = self.basis
        g = _as_grid_function(b, g)
        theta0 = b.thetas[0]
        return theta0 * b.grid.trapz(theta0 * g * np.exp(-2 * self.ell_values))

    def rho_inner(self, f, g) -> float:
        b = self.basis
        return float(b.grid.trapz(_as_grid_function(b, f) * _as_grid_function(b, g) * np.exp(-2 * self.ell_values)))

    def yaglom_limit(self, x, y):
        """lim e^{lambda_0 t} p(t, x, y) = e^{-2l(y)} Theta_0(x) Theta_0(y)."""
        th0 = self.basis.thetas[0]
        g = self.basis.grid
        from .grid import interpolate

        tx = interpolate(g, th0, x)
        ty = interpolate(g, th0, y)
        return np.exp(-2 * self._ell(y)) * tx * ty

    # --- spectral gap ----------------------------------------------------------

    def gap_decay(self, g, kappa: float, times, A: float | None = None, fit_window=None) -> GapReport:
        """sup-norm distance of e^{lambda_0 t} P_t g to Pi g against the D(kappa) bound."""
        b = self.basis
        g = _as_grid_function(b, g)
        times = np.asarray(times, dtype=float)
        if A is None:
            A = float(np.max(np.abs(g) * np.exp(-kappa * np.abs(b.x))))
        coeffs = self.coefficients(g, kappa)
        Pi_g = self.projection_Pi(g)
        errs = np.empty(times.size)
        for i, t in enumerate(times):
            self._check_t(t)
            errs[i] = np.max(np.abs(math.exp(b.lambdas[0] * t) * self.synthesize(coeffs, t) - Pi_g))
        saturated = errs <= self.tail_tol
        rate_expected = float(b.lambdas[1] - b.lambdas[0])
        sel = ~saturated
        if fit_window is not None:
            sel &= (times >= fit_window[0]) & (times <= fit_window[1])
        if sel.sum() >= 2:
            slope = np.polyfit(times[sel], np.log(errs[sel]), 1)[0]
            fitted = float(-slope)
        else:
            fitted = float("nan")
        lD = log_D(b, kappa)
        with np.errstate(over="ignore"):
            bound = A * np.exp(lD - rate_expected * times)
        E = 2 * b.tildeE
        burn_in = 3 * (4 * (b.beta + 1) / E + 4 * (kappa + b.beta + 1) / E)
        return GapReport(times, errs, fitted, rate_expected, A, kappa, lD, bound, saturated, burn_in)

    # --- heat equation --------------------------------------------------------

    def _fields(self, z):
        b = self.basis
        return b.field_at("a", z), b.field_at("da", z), b.field_at("V", z)

    def generator_residual(self, t, x, y, dt, dh, var: str, adjoint: bool) -> float:
        """|D_t p - G p| with G acting on ``var`` ('x' or 'y'); G = L or, if ``adjoint``, L*.

        L u = u''/2 - a u' + V u and L* u = u''/2 + a u' + a' u + V u, with
        centered differences of steps dt and dh.
        """
        if t - dt <= 0:
            raise ValueError("need t - dt > 0")
        pt = (self._p_unclamped(t + dt, x, y) - self._p_unclamped(t - dt, x, y)) / (2 * dt)
        z = x if var == "x" else y
        shift = (lambda s: (x + s, y)) if var == "x" else (lambda s: (x, y + s))
        p0 = self._p_unclamped(t, x, y)
        pp = self._p_unclamped(t, *shift(dh))
        pm = self._p_unclamped(t, *shift(-dh))
        d1 = (pp - pm) / (2 * dh)
        d2 = (pp - 2 * p0 + pm) / dh**2
        a, da, V = self._fields(z)
        if adjoint:
            gen = 0.5 * d2 + a * d1 + da * p0 + V * p0
        else:
            gen = 0.5 * d2 - a * d1 + V * p0
        return float(np.max(np.abs(pt - gen)))

    def _p_unclamped(self, t, x, y):
        return np.exp(self._ell(x) - self._ell(y)) * self._ptilde_raw(t, x, y)

    def heat_residual(self, t, x, y, dt=1e-3, dh=1e-3) -> HeatResidual:
        """Backward equation in the start point and forward (adjoint) equation in the end point."""
        self._check_t(t - dt)
        back = self.generator_residual(t, x, y, dt, dh, var="x", adjoint=False)
        fwd = self.generator_residual(t, x, y, dt, dh, var="y", adjoint=True)
        return HeatResidual(back, fwd, float(np.max(self._p_unclamped(t, x, y))))
