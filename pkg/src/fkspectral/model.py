"""Branching-diffusion problem instances and their reduction to Schrödinger form.

The underlying individual motion is ``dX = dB - a(X) dt`` and individuals
branch at rate ``b`` and die at rate ``d``; ``V = b - d``. A Girsanov change of
measure turns the Feynman-Kac semigroup into a Brownian one with potential
``tildeV = V + (a' - a^2) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .grid import Grid

Func = Callable[[np.ndarray], np.ndarray]


class AssumptionViolation(ValueError):
    """A hypothesis required by the theory fails on the grid."""


class QuadratureError(RuntimeError):
    pass


class ModelFileError(ValueError):
    """Malformed or unreadable model configuration."""


def _const(c: float) -> Func:
    return lambda x: np.full(np.shape(x), float(c))


@dataclass(frozen=True)
class ModelSpec:
    """One problem instance in unit-diffusion coordinates.

    ``a`` and ``da`` (its derivative) are vectorized callables, as are ``V``
    and, when a branching simulation is wanted, the rates ``b`` and ``d``.
    """

    a: Func
    da: Func
    V: Func
    b: Func | None = None
    d: Func | None = None
    beta: float = 0.0
    gamma: float = 0.0
    E_const: float = 1.0
    x0: float = 0.0
    M_upper: float = np.inf
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.E_const <= 0:
            raise ValueError("E_const must be positive")
        if self.x0 < 0:
            raise ValueError("x0 must be nonnegative")
        if (self.b is None) != (self.d is None):
            raise ValueError("birth and death rates must be given together")

    @property
    def has_rates(self) -> bool:
        return self.b is not None

    def tildeV(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a(x)
        return self.V(x) + 0.5 * (self.da(x) - a * a)


@dataclass(frozen=True)
class ReducedSpec:
    """Grid samples of the Girsanov-reduced problem plus the H4 constants for tildeV."""

    spec: ModelSpec
    grid: Grid
    tildeV_values: np.ndarray
    ell_values: np.ndarray
    tildeA: float
    tildeE: float
    tilde_x0: float

    def tildeV(self, x):
        return self.spec.tildeV(x)

    @property
    def beta(self) -> float:
        return self.spec.beta

    @property
    def gamma(self) -> float:
        return self.spec.gamma


# --- quadrature -------------------------------------------------------------


def adaptive_simpson(f: Func, lo, hi, tol: float = 1e-10, max_levels: int = 60):
    """Vectorized adaptive Simpson rule over many intervals at once.

    ``lo`` and ``hi`` are arrays of interval ends; ``tol`` is the absolute
    tolerance for each interval. Raises QuadratureError when some interval is
    still unresolved after ``max_levels`` bisections.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    owner = np.arange(lo.size)
    result = np.zeros(lo.size)
    fa, fb = f(lo), f(hi)
    mid = 0.5 * (lo + hi)
    fm = f(mid)
    whole = (hi - lo) / 6.0 * (fa + 4 * fm + fb)
    tols = np.full(lo.size, float(tol))
    for _ in range(max_levels):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (fa + 4 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4 * frm + fb)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * tols
        np.add.at(result, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        if not keep.any():
            return result
        # split survivors into left and right halves
        owner = np.concatenate([owner[keep], owner[keep]])
        lo, mid, hi = (
            np.concatenate([lo[keep], mid[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([mid[keep], hi[keep]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) / 2.0
    raise QuadratureError(
        f"adaptive Simpson did not converge within {max_levels} levels; drift input looks pathological"
    )


def ell(spec: ModelSpec, x: float) -> float:
    """l(x) = integral of the drift from 0 to x."""
    if x == 0:
        return 0.0
    return float(adaptive_simpson(spec.a, [0.0], [float(x)])[0])


def cumulative_integral(f: Func, grid: Grid, tol: float = 1e-10) -> np.ndarray:
    """Integral of ``f`` from 0 to every node, node-to-node adaptive Simpson."""
    x = grid.nodes
    seg = adaptive_simpson(f, x[:-1], x[1:], tol=tol / grid.n)
    out = np.empty(grid.n)
    out[0] = 0.0
    np.cumsum(seg, out=out[1:])
    return out - out[grid.center]


def ell_on_grid(spec: ModelSpec, grid: Grid) -> np.ndarray:
    return cumulative_integral(spec.a, grid)


# --- reduction --------------------------------------------------------------


def find_tilde_x0(tildeV_values, grid: Grid, tildeE: float, x0: float) -> float:
    """Smallest node x >= x0 with tildeV(y) <= -tildeE|y| for every node |y| >= x."""
    x = grid.nodes
    ok = tildeV_values <= -tildeE * np.abs(x)
    r = np.abs(x)
    # order nodes by |x| descending; a candidate radius works when all nodes at or beyond it are ok
    radii = np.unique(r)[::-1]
    bad_r = r[~ok]
    worst_bad = bad_r.max() if bad_r.size else -np.inf
    if worst_bad >= grid.L - 1e-12:
        raise AssumptionViolation(
            f"tildeV exceeds -{tildeE:g}|x| at the grid edge |x| = {grid.L}; H4 fails on this domain"
        )
    candidates = radii[(radii > worst_bad) & (radii >= x0 - 1e-12)]
    return float(candidates.min())


def reduce(spec: ModelSpec, domain: Grid) -> ReducedSpec:
    """Girsanov reduction: sample tildeV and l on the grid, fix the H4 constants for tildeV."""
    x = domain.nodes
    tv = spec.tildeV(x)
    lv = ell_on_grid(spec, domain)
    tildeE = spec.E_const / 2.0
    tilde_x0 = find_tilde_x0(tv, domain, tildeE, spec.x0)
    return ReducedSpec(
        spec=spec,
        grid=domain,
        tildeV_values=tv,
        ell_values=lv,
        tildeA=float(tv.max()),
        tildeE=tildeE,
        tilde_x0=tilde_x0,
    )


# --- hypothesis checks ------------------------------------------------------


@dataclass
class HypothesisCheck:
    passed: bool
    worst_node: float | None = None
    worst_value: float | None = None
    first_violation: float | None = None
    note: str = ""


@dataclass
class AssumptionReport:
    checks: dict
    A_V: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "A_V": self.A_V,
            "checks": {k: vars(c) for k, c in self.checks.items()},
        }


def _violation(x, excess, rtol: float = 1e-9) -> HypothesisCheck:
    # equality cases (e.g. |l| = beta|x| for constant drift) must not fail on rounding
    bad = excess > rtol * max(1.0, float(np.abs(x).max()))
    if not bad.any():
        i = int(np.argmax(excess))
        return HypothesisCheck(True, float(x[i]), float(excess[i]))
    i = int(np.argmax(excess))
    first = float(np.min(np.abs(x[bad])))
    return HypothesisCheck(False, float(x[i]), float(excess[i]), first)


def validate_assumptions(spec: ModelSpec, domain: Grid) -> AssumptionReport:
    """Grid surrogate checks for H0.2, H0.3, H2, H3, H4 and the rate consistency.

    H1 (continuity) is assumed. Values in ``worst_value`` are the largest
    excess over the allowed bound (negative means slack).
    """
    x = domain.nodes
    r = np.abs(x)
    V = spec.V(x)
    checks = {"H1": HypothesisCheck(True, note="assumed: callables are continuous")}

    lv = ell_on_grid(spec, domain)
    checks["H0.2"] = _violation(x, np.abs(lv) - (spec.gamma + spec.beta * r))

    a = spec.a(x)
    checks["H0.3"] = _violation(x, spec.da(x) - a * a - spec.M_upper)

    # H2: the supremum must be attained away from the truncation edge
    edge = r >= 0.9 * domain.L
    i = int(np.argmax(V))
    inner_max = V[~edge].max()
    h2 = HypothesisCheck(not edge[i] or V[i] <= inner_max, float(x[i]), float(V[i]))
    if not h2.passed:
        h2.note = "maximum of V sits at the truncation edge: V looks unbounded above"
    checks["H2"] = h2

    # H3: V decreasing towards both edges and below its interior values there
    left = V[: max(2, domain.n // 20)]
    right = V[-max(2, domain.n // 20) :]
    decreasing = bool(np.all(np.diff(left) >= -1e-12) and np.all(np.diff(right) <= 1e-12))
    lower = max(V[0], V[-1]) < V[domain.center]
    checks["H3"] = HypothesisCheck(
        decreasing and lower, float(x[0] if V[0] > V[-1] else x[-1]), float(max(V[0], V[-1]))
    )

    h4 = _violation(x[r >= spec.x0], (V + spec.E_const * r)[r >= spec.x0])
    checks["H4"] = h4

    if spec.has_rates:
        b, d = spec.b(x), spec.d(x)
        neg = np.minimum(b, d)
        mismatch = np.abs(b - d - V)
        ok = bool(neg.min() >= 0 and mismatch.max() <= 1e-12 * max(1.0, np.abs(V).max()))
        j = int(np.argmax(mismatch))
        checks["rates"] = HypothesisCheck(ok, float(x[j]), float(mismatch[j]))
    return AssumptionReport(checks, float(V.max()))


# --- diffusion-coefficient reduction ---------------------------------------


def _numeric_derivative(f: Func, step: float = 1e-4) -> Func:
    def df(x):
        x = np.asarray(x, dtype=float)
        return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * step)

    return df


def reduce_sigma(
    sigma: Func,
    a0: Func,
    V: Func,
    domain: Grid,
    dsigma: Func | None = None,
    d2sigma: Func | None = None,
    da0: Func | None = None,
    b: Func | None = None,
    d: Func | None = None,
    **constants,
) -> tuple[ModelSpec, Callable, Callable]:
    """Transport ``dY = sigma(Y) dB - a0(Y) dt`` to unit diffusion via G(y) = int_0^y du/sigma.

    Returns ``(spec, G, G_inv)``. The new drift is ``(a0/sigma + sigma'/2)`` and
    the new potential ``V``, both composed with ``G^{-1}``. Missing derivatives
    are taken by 5-point differences. ``constants`` (beta, gamma, E_const, x0,
    M_upper, name) are passed to the new spec.
    """
    y = domain.nodes
    s = sigma(y)
    if np.any(s == 0) or (s.min() < 0 < s.max()):
        raise ValueError("sigma must not vanish or change sign on the domain (G not monotone)")
    dsigma = dsigma or _numeric_derivative(sigma)
    d2sigma = d2sigma or _numeric_derivative(dsigma)
    da0 = da0 or _numeric_derivative(a0)

    Gy = cumulative_integral(lambda u: 1.0 / sigma(u), domain)
    order = np.argsort(Gy)
    G = PchipInterpolator(y, Gy, extrapolate=True)
    G_inv = PchipInterpolator(Gy[order], y[order], extrapolate=True)

    def f(u):
        return a0(u) / sigma(u) + 0.5 * dsigma(u)

    def df(u):
        su = sigma(u)
        return (da0(u) * su - a0(u) * dsigma(u)) / su**2 + 0.5 * d2sigma(u)

    def a(x):
        return f(G_inv(x))

    def da(x):
        u = G_inv(x)
        return df(u) * sigma(u)

    def W(x):
        return V(G_inv(x))

    rates = {}
    if b is not None:
        rates = {"b": lambda x: b(G_inv(x)), "d": lambda x: d(G_inv(x))}
    spec = ModelSpec(a=a, da=da, V=W, **rates, **constants)
    return spec, G, G_inv


# --- configuration files ----------------------------------------------------


def _tabulated_spec(cfg: dict) -> ModelSpec:
    try:
        x = np.asarray(cfg["x"], dtype=float)
        cols = {k: np.asarray(cfg[k], dtype=float) for k in ("a", "da", "V")}
    except KeyError as exc:
        raise ModelFileError(f"tabulated model needs arrays x, a, da, V (missing {exc})") from None
    if x.ndim != 1 or x.size < 4 or np.any(np.diff(x) <= 0):
        raise ModelFileError("tabulated x must be strictly increasing with at least 4 samples")
    for k, v in cols.items():
        if v.shape != x.shape:
            raise ModelFileError(f"column {k} has {v.size} samples, expected {x.size}")
    splines = {k: CubicSpline(x, v) for k, v in cols.items()}
    rates = {}
    if "b" in cfg or "d" in cfg:
        if not ("b" in cfg and "d" in cfg):
            raise ModelFileError("tabulated birth and death rates must be given together")
        rates = {k: CubicSpline(x, np.asarray(cfg[k], dtype=float)) for k in ("b", "d")}
    return ModelSpec(
        a=splines["a"],
        da=splines["da"],
        V=splines["V"],
        **rates,
        beta=float(cfg.get("beta", 0.0)),
        gamma=float(cfg.get("gamma", 0.0)),
        E_const=float(cfg.get("E", 1.0)),
        x0=float(cfg.get("x0", 0.0)),
        M_upper=float(cfg.get("M_upper", np.inf)),
        name=str(cfg.get("name", "custom_tabulated")),
    )


def spec_from_config(cfg: dict) -> tuple[ModelSpec, Grid]:
    """Build ``(spec, grid)`` from a parsed model configuration."""
    from . import hermite

    if not isinstance(cfg, dict):
        raise ModelFileError("model configuration must be a JSON object")
    kind = cfg.get("kind")
    try:
        grid = Grid(float(cfg.get("L", 12.0)), int(cfg.get("n_grid", 12001)))
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"bad grid parameters: {exc}") from None
    if kind == "builtin_hermite":
        try:
            model = hermite.HermiteModel(float(cfg.get("sigma", 1.0)), float(cfg.get("c", 0.0)))
        except ValueError as exc:
            raise ModelFileError(str(exc)) from None
        return hermite.reduced_spec(model), grid
    if kind == "builtin_oscillator":
        sigma = float(cfg.get("sigma", 1.0))
        if not sigma > 0:
            raise ModelFileError("sigma must be positive")
        return hermite.oscillator_spec(sigma), grid
    if kind == "custom_tabulated":
        return _tabulated_spec(cfg), grid
    raise ModelFileError(f"unknown model kind {kind!r}")


def load_model(path) -> tuple[ModelSpec, Grid, dict]:
    """Read a JSON model file; returns ``(spec, grid, raw_config)``."""
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file {path} is not valid JSON: {exc}") from None
    spec, grid = spec_from_config(cfg)
    return spec, grid, cfg
