"""Uniform truncation grid and the quadrature/interpolation helpers built on it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, L] with an odd node count, so that 0 is a node."""

    L: float = 12.0
    n: int = 12001
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"grid half-width must be positive, got {self.L}")
        if self.n < 5 or self.n % 2 == 0:
            raise ValueError(f"grid node count must be odd and >= 5, got {self.n}")
        nodes = np.linspace(-self.L, self.L, self.n)
        nodes[self.n // 2] = 0.0
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def center(self) -> int:
        return self.n // 2

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def trapz(self, values, axis=-1):
        """Trapezoid rule over the full grid."""
        values = np.asarray(values)
        s = values.sum(axis=axis)
        first = np.take(values, 0, axis=axis)
        last = np.take(values, -1, axis=axis)
        return self.h * (s - 0.5 * (first + last))

    def cumtrapz(self, values):
        """Cumulative trapezoid integral from -L, same length as the grid."""
        values = np.asarray(values, dtype=float)
        out = np.empty_like(values)
        out[0] = 0.0
        np.cumsum(0.5 * self.h * (values[1:] + values[:-1]), out=out[1:])
        return out

    def index_of(self, x) -> np.ndarray:
        """Nearest node index (clipped to the grid)."""
        idx = np.rint((np.asarray(x, dtype=float) + self.L) / self.h).astype(int)
        return np.clip(idx, 0, self.n - 1)

    def on_nodes(self, x, rtol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.abs(self.nodes[self.index_of(x)] - x) <= rtol * self.h))

    def to_dict(self) -> dict:
        return {"L": float(self.L), "n": int(self.n)}


def lagrange_weights(grid: Grid, x, order: int = 10):
    """Stencil start indices and Lagrange weights for evaluating grid data at ``x``.

    Uses ``order`` consecutive nodes around each point. Returns ``(start, w)`` with
    ``w`` of shape ``x.shape + (order,)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > grid.L * (1 + 1e-12)):
        raise ValueError("evaluation point outside the grid")
    h = grid.h
    s = (x + grid.L) / h
    start = np.floor(s).astype(int) - (order // 2 - 1)
    start = np.clip(start, 0, grid.n - order)
    u = s - start  # position in stencil units, nodes at 0..order-1
    j = np.arange(order)
    diff = u[..., None] - j
    exact = np.isclose(diff, 0.0, atol=1e-12)
    # barycentric weights for equispaced nodes: (-1)^j C(order-1, j)
    from math import comb

    bw = np.array([(-1) ** k * comb(order - 1, k) for k in j], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = bw / diff
        w = t / t.sum(axis=-1, keepdims=True)
    hit = exact.any(axis=-1)
    if np.any(hit):
        w[hit] = exact[hit].astype(float)
    return start, w


def interpolate(grid: Grid, values, x, order: int = 10):
    """High-order local interpolation of grid samples.

    ``values`` may be 1-D (n,) or 2-D (m, n); the result has shape
    ``x.shape`` or ``(m,) + x.shape``.
    """
    values = np.asarray(values)
    xa = np.asarray(x, dtype=float)
    start, w = lagrange_weights(grid, xa.ravel(), order)
    idx = start[:, None] + np.arange(order)
    if values.ndim == 1:
        out = np.sum(values[idx] * w, axis=-1)
        return out.reshape(xa.shape)
    out = np.einsum("mpj,pj->mp", values[:, idx], w)
    return out.reshape((values.shape[0],) + xa.shape)
