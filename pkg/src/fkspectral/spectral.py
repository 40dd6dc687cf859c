"""Eigenpairs of -1/2 d^2/dx^2 - tildeV on a Dirichlet box and the a priori bounds they obey."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eig_banded, eigh_tridiagonal, solve_banded

from .grid import Grid, interpolate
from .model import ReducedSpec

__all__ = [
    "Grid",
    "SpectralBasis",
    "BoundReport",
    "NearDegenerateError",
    "solve_eigen",
    "growth_constant",
    "log_C1",
    "check_growth_bound",
    "check_sup_bound",
    "check_decay_bound",
    "check_derivative_bound",
    "sign_changes",
    "load_basis",
]

E_OVER_PI_QUARTER = (math.e / math.pi) ** 0.25


class NearDegenerateError(RuntimeError):
    """Two computed eigenvalues are closer than 1e-9: the box is too small."""


@dataclass(frozen=True)
class SpectralBasis:
    grid: Grid
    lambdas: np.ndarray
    psis: np.ndarray
    dpsis: np.ndarray
    thetas: np.ndarray
    ell_values: np.ndarray
    tildeV_values: np.ndarray
    a_values: np.ndarray
    da_values: np.ndarray
    V_values: np.ndarray
    tildeA: float
    tildeE: float
    tilde_x0: float
    beta: float
    gamma: float
    stencil: int = 5
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.lambdas)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def modes_at(self, x) -> np.ndarray:
        """Psi_k evaluated at arbitrary points; shape (K,) + shape(x)."""
        x = np.asarray(x, dtype=float)
        if self.grid.on_nodes(x):
            return self.psis[:, self.grid.index_of(x)]
        return interpolate(self.grid, self.psis, x)

    def field_at(self, name: str, x):
        """Grid field (ell, tildeV, a, da, V) evaluated at arbitrary points."""
        values = getattr(self, f"{name}_values")
        x = np.asarray(x, dtype=float)
        if self.grid.on_nodes(x):
            return values[self.grid.index_of(x)]
        return interpolate(self.grid, values, x)

    def save(self, path) -> None:
        """Write the basis as ``.npz`` arrays plus a JSON side file with scalars."""
        path = Path(path)
        np.savez(
            path.with_suffix(".npz"),
            lambdas=self.lambdas,
            psis=self.psis,
            dpsis=self.dpsis,
            thetas=self.thetas,
            ell_values=self.ell_values,
            tildeV_values=self.tildeV_values,
            a_values=self.a_values,
            da_values=self.da_values,
            V_values=self.V_values,
        )
        scalars = {
            "grid": self.grid.to_dict(),
            "tildeA": self.tildeA,
            "tildeE": self.tildeE,
            "tilde_x0": self.tilde_x0,
            "beta": self.beta,
            "gamma": self.gamma,
            "stencil": self.stencil,
            "meta": self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(scalars, indent=2, sort_keys=True))


def load_basis(path) -> SpectralBasis:
    path = Path(path)
    scalars = json.loads(path.with_suffix(".json").read_text())
    with np.load(path.with_suffix(".npz")) as data:
        arrays = {k: data[k] for k in data.files}
    grid = Grid(**scalars.pop("grid"))
    return SpectralBasis(grid=grid, **arrays, **scalars)


# --- solver -----------------------------------------------------------------


def _derivative(values: np.ndarray, h: float) -> np.ndarray:
    """4th-order central differences along the last axis, one-sided 4th order at the ends."""
    v = values
    d = np.empty_like(v)
    d[..., 2:-2] = (v[..., :-4] - 8 * v[..., 1:-3] + 8 * v[..., 3:-1] - v[..., 4:]) / (12 * h)
    c = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[..., 0] = v[..., :5] @ c
    d[..., 1] = v[..., :5] @ c1
    d[..., -1] = -(v[..., -5:][..., ::-1] @ c)
    d[..., -2] = -(v[..., -5:][..., ::-1] @ c1)
    return d


def _banded_eigvecs(ab_lower: np.ndarray, lambdas: np.ndarray, iterations: int = 3) -> np.ndarray:
    """Inverse iteration for a symmetric banded matrix given in lower storage."""
    m = ab_lower.shape[1]
    p = ab_lower.shape[0] - 1
    # full band storage for solve_banded: rows = upper (p) + diag + lower (p)
    full = np.zeros((2 * p + 1, m))
    for k in range(p + 1):
        full[p + k, : m - k] = ab_lower[k, : m - k]
        full[p - k, k:] = ab_lower[k, : m - k]
    rng = np.random.default_rng(12345)
    vecs = np.empty((len(lambdas), m))
    scale = np.abs(ab_lower[0]).max()
    for j, lam in enumerate(lambdas):
        shifted = full.copy()
        shifted[p] -= lam + 1e-13 * scale
        v = rng.standard_normal(m)
        for _ in range(iterations):
            v = solve_banded((p, p), shifted, v, check_finite=False)
            v /= np.linalg.norm(v)
        vecs[j] = v
    return vecs


def _repair_tail(v: np.ndarray, tildeV: np.ndarray, lam: float, h: float, rel: float = 1e-10) -> np.ndarray:
    """Rebuild the far tails of an eigenvector where its values are at roundoff level.

    Beyond the outermost classically allowed point and below ``rel * max|v|``,
    solver noise can flip signs. There the decaying solution is recomputed by
    the three-point recurrence run inward from the wall, which is the stable
    direction, and scaled to match ``v`` at the junction node.
    """
    v = v.copy()
    peak = np.abs(v).max()
    forbidden = tildeV + lam < 0
    n = v.size
    for side in (1, -1):
        u = v if side == 1 else v[::-1]
        tv = tildeV if side == 1 else tildeV[::-1]
        fb = forbidden if side == 1 else forbidden[::-1]
        allowed = np.flatnonzero(~fb)
        start = allowed[-1] + 1 if allowed.size else n // 2
        small = np.flatnonzero(np.abs(u[start:]) < rel * peak)
        if not small.size:
            continue
        j = start + small[0]
        if j >= n - 2:
            continue
        # ratios rho_i = u_{i-1} / u_i from the wall inward
        c = 2.0 - 2.0 * h * h * (tv + lam)
        rho = np.empty(n)
        rho[n - 1] = np.inf
        rho[n - 2] = c[n - 2]
        for i in range(n - 3, j, -1):
            rho[i] = c[i] - 1.0 / rho[i + 1]
        for i in range(j + 1, n - 1):
            u[i] = u[i - 1] / rho[i]
        u[n - 1] = 0.0
        if side == -1:
            v = u[::-1].copy()
        else:
            v = u
    return v


def solve_eigen(reduced: ReducedSpec, grid: Grid | None = None, K: int = 32, stencil: int = 5) -> SpectralBasis:
    """Compute the K lowest eigenpairs of H = -1/2 D2 - tildeV with Dirichlet walls at +-L.

    ``stencil`` selects the second-difference operator: 3 (tridiagonal) or
    5 (pentadiagonal, fourth order). Eigenvectors are normalized by the
    trapezoid rule; Psi_0 is made positive and, for k >= 1, the first entry of
    non-negligible size (above 1e-8 max|Psi_k|) from the left is positive.
    """
    grid = grid or reduced.grid
    if grid != reduced.grid:
        raise ValueError("reduced spec was sampled on a different grid")
    if K < 2:
        raise ValueError("need at least two modes")
    if K * 20 > grid.n:
        raise ValueError(f"K={K} too large for {grid.n} nodes")
    h = grid.h
    tv = reduced.tildeV_values[1:-1]
    m = grid.n - 2
    if stencil == 3:
        diag = 1.0 / h**2 - tv
        off = np.full(m - 1, -0.5 / h**2)
        lambdas, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, K - 1))
        vecs = vecs.T
    elif stencil == 5:
        ab = np.zeros((3, m))
        ab[0] = 1.25 / h**2 - tv
        ab[1, :-1] = -2.0 / (3.0 * h**2)
        ab[2, :-2] = 1.0 / (24.0 * h**2)
        lambdas = eig_banded(ab, lower=True, eigvals_only=True, select="i", select_range=(0, K - 1))
        vecs = _banded_eigvecs(ab, lambdas)
    else:
        raise ValueError("stencil must be 3 or 5")

    gaps = np.diff(lambdas)
    if np.any(gaps < 1e-9):
        k = int(np.argmin(gaps))
        raise NearDegenerateError(
            f"lambda_{k + 1} - lambda_{k} = {gaps[k]:.3e}; enlarge L (Dirichlet box splitting)"
        )

    psis = np.zeros((K, grid.n))
    psis[:, 1:-1] = vecs
    for k in range(K):
        psis[k] = _repair_tail(psis[k], reduced.tildeV_values, lambdas[k], h)
    psis /= np.sqrt(grid.trapz(psis**2))[:, None]
    for k in range(K):
        v = psis[k]
        if k == 0:
            s = np.sign(v.sum())
        else:
            big = np.flatnonzero(np.abs(v) > 1e-8 * np.abs(v).max())
            s = np.sign(v[big[0]])
        psis[k] = s * v

    spec = reduced.spec
    x = grid.nodes
    ell_values = reduced.ell_values
    return SpectralBasis(
        grid=grid,
        lambdas=np.asarray(lambdas, dtype=float),
        psis=psis,
        dpsis=_derivative(psis, h),
        thetas=psis * np.exp(ell_values),
        ell_values=ell_values,
        tildeV_values=reduced.tildeV_values,
        a_values=spec.a(x),
        da_values=spec.da(x),
        V_values=spec.V(x),
        tildeA=reduced.tildeA,
        tildeE=reduced.tildeE,
        tilde_x0=reduced.tilde_x0,
        beta=spec.beta,
        gamma=spec.gamma,
        stencil=stencil,
        meta={"model": spec.name, **spec.params},
    )


def sign_changes(v: np.ndarray, rel: float = 1e-8) -> int:
    """Number of sign changes, ignoring entries below ``rel * max|v|``."""
    v = np.asarray(v)
    sig = v[np.abs(v) > rel * np.abs(v).max()]
    return int(np.count_nonzero(np.diff(np.sign(sig)) != 0))


# --- bound checks -----------------------------------------------------------


@dataclass
class BoundReport:
    name: str
    passed: bool
    rows: list
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "constants": self.constants,
            "notes": self.notes,
            "rows": self.rows,
        }

    def margins(self) -> np.ndarray:
        return np.array([r["margin"] for r in self.rows if r.get("applicable", True)])


def growth_constant(tilde_x0: float, tildeE: float) -> float:
    """Constant of the k^(1/3) lower bound on eigenvalue growth."""
    return (tildeE**2 / (8 * tilde_x0 + 2)) ** (1.0 / 3.0)


def check_growth_bound(basis: SpectralBasis) -> BoundReport:
    """lambda_k >= C k^(1/3) for every k with lambda_k above S0 = max |tildeV| on |x| <= tilde_x0."""
    x = basis.x
    S0 = float(np.abs(basis.tildeV_values[np.abs(x) <= basis.tilde_x0]).max())
    C = growth_constant(basis.tilde_x0, basis.tildeE)
    rows = []
    for k, lam in enumerate(basis.lambdas):
        rhs = C * k ** (1.0 / 3.0)
        applicable = bool(lam > S0)
        rows.append(
            {"k": k, "lambda": float(lam), "rhs": rhs, "margin": float(lam - rhs), "applicable": applicable}
        )
    passed = all(r["margin"] >= 0 for r in rows if r["applicable"])
    notes = [] if any(r["applicable"] for r in rows) else ["no computed eigenvalue exceeds S0"]
    return BoundReport("growth_lambda", passed, rows, {"S0": S0, "C": C}, notes)


def check_sup_bound(basis: SpectralBasis, sharper: float | None = None, rtol: float = 0.0) -> BoundReport:
    """max |Psi_k| <= (e/pi)^(1/4) (lambda_k + tildeA)^(1/4); optionally also <= ``sharper``.

    ``rtol`` is a relative allowance used only for the optional sharper bound,
    which can be attained with equality.
    """
    rows, notes = [], []
    passed = True
    for k, lam in enumerate(basis.lambdas):
        s = lam + basis.tildeA
        m = float(np.abs(basis.psis[k]).max())
        if s <= 1e-12:
            notes.append(f"lambda_{k} + tildeA = {s:.3e} <= 0: inconsistent basis")
            rows.append({"k": k, "max_abs_psi": m, "rhs": float("nan"), "margin": float("-inf")})
            passed = False
            continue
        rhs = E_OVER_PI_QUARTER * s**0.25
        row = {"k": k, "max_abs_psi": m, "rhs": rhs, "margin": rhs - m}
        ok = m <= rhs
        if sharper is not None:
            row["sharper_rhs"] = sharper
            row["sharper_margin"] = sharper * (1 + rtol) - m
            ok = ok and row["sharper_margin"] >= 0
        passed = passed and ok
        rows.append(row)
    consts = {"tildeA": basis.tildeA}
    if sharper is not None:
        consts.update(sharper=sharper, rtol=rtol)
    return BoundReport("boundPsik", passed, rows, consts, notes)


def _x1(R: float, t: float, tilde_x0: float) -> float:
    return max(2 * tilde_x0, 8 * R * t + math.sqrt(8 * t))


def log_Gamma(R: float, t: float, tildeA: float, tilde_x0: float) -> float:
    first = math.log((4 * math.pi) ** -0.25 + (2 * math.pi**2) ** -0.25) + abs(tildeA + 4 * R**2) * t
    second = math.log(E_OVER_PI_QUARTER) + R * _x1(R, t, tilde_x0)
    return float(np.logaddexp(first, second))


def log_C1(R: float, tildeA: float, tildeE: float, tilde_x0: float) -> float:
    """log C1(R) = log Gamma(R, t0) - log(t0)/4 with t0 = 2R/tildeE."""
    if R <= 0:
        raise ValueError("R must be positive; use check_sup_bound for R = 0")
    t0 = 2 * R / tildeE
    return log_Gamma(R, t0, tildeA, tilde_x0) - 0.25 * math.log(t0)


def check_decay_bound(basis: SpectralBasis, R: float) -> BoundReport:
    """e^{R|x|} |Psi_k(x)| <= C1(R) e^{lambda_k t0} at every node (checked in log form)."""
    lc = log_C1(R, basis.tildeA, basis.tildeE, basis.tilde_x0)
    t0 = 2 * R / basis.tildeE
    r = np.abs(basis.x)
    rows = []
    for k, lam in enumerate(basis.lambdas):
        with np.errstate(divide="ignore"):
            lhs = R * r + np.log(np.abs(basis.psis[k]))
        worst = float(lhs.max())
        rhs = lc + lam * t0
        rows.append({"k": k, "log_lhs_max": worst, "log_rhs": rhs, "margin": rhs - worst})
    passed = all(r_["margin"] >= 0 for r_ in rows)
    consts = {"R": R, "t0": t0, "x1": _x1(R, t0, basis.tilde_x0), "log_C1": lc}
    return BoundReport("boundPsik2", passed, rows, consts)


def _zeros(v: np.ndarray, x: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    """Linear-interpolated sign-change locations of v, ignoring negligible entries."""
    keep = np.flatnonzero(np.abs(v) > rel * np.abs(v).max())
    vs = v[keep]
    idx = np.flatnonzero(np.sign(vs[1:]) != np.sign(vs[:-1]))
    out = []
    for i in idx:
        i0, i1 = keep[i], keep[i + 1]
        # refine inside the (possibly wider) bracket on the raw grid
        seg = v[i0 : i1 + 1]
        j = i0 + int(np.flatnonzero(np.sign(seg[1:]) != np.sign(seg[:-1]))[0])
        xa, xb, va, vb = x[j], x[j + 1], v[j], v[j + 1]
        out.append(xa - va * (xb - xa) / (vb - va))
    return np.array(out)


def check_derivative_bound(basis: SpectralBasis, k_max: int | None = None) -> BoundReport:
    """|Psi_k'(x*)| <= A1 + A2 lambda_k with x*, A1, A2 built from Psi_2 as in the Wronskian argument."""
    if basis.K < 3:
        raise ValueError("need at least three modes")
    x = basis.x
    u, du = basis.psis[2], basis.dpsis[2]
    zeros = _zeros(u, x)
    notes = []
    if len(zeros) != 2:
        notes.append(f"Psi_2 has {len(zeros)} sign changes, expected 2")
        if len(zeros) < 2:
            return BoundReport("growthPsi'k", False, [], {}, notes)
    x1, x2 = zeros[0], zeros[-1]
    inside = np.flatnonzero((x > x1) & (x < x2))
    istar = inside[np.argmin(np.abs(du[inside]))]
    xstar = float(x[istar])
    u_star = abs(u[istar])
    du_x1 = abs(float(np.interp(x1, x, du)))
    lam = basis.lambdas
    A2 = (E_OVER_PI_QUARTER * du_x1 + 2) / u_star
    D1 = (E_OVER_PI_QUARTER * du_x1 * basis.tildeA + 2 * abs(lam[2])) / u_star
    if D1 < 0:
        notes.append(f"D1 = {D1:.4g} is negative")
    ks = np.flatnonzero(lam + basis.tildeA >= 1)
    k0 = int(ks[0]) if ks.size else basis.K
    dstar = np.abs(basis.dpsis[:, istar])
    A1 = max([D1] + [dstar[j] + A2 * abs(lam[j]) for j in range(k0)])
    last = basis.K if k_max is None else min(basis.K, k_max + 1)
    rows = []
    for k in range(last):
        rhs = A1 + A2 * lam[k]
        rows.append(
            {"k": k, "abs_dpsi_xstar": float(dstar[k]), "rhs": float(rhs), "margin": float(rhs - dstar[k]),
             "applicable": k >= k0}
        )
    passed = all(r["margin"] >= 0 for r in rows)
    consts = {"x_star": xstar, "x1": float(x1), "x2": float(x2), "A1": float(A1), "A2": float(A2),
              "D1": float(D1), "k0": k0}
    return BoundReport("growthPsi'k", passed, rows, consts, notes)
