import math
import warnings

import numpy as np
import pytest

from fkspectral import hermite
from fkspectral.grid import Grid
from fkspectral.model import reduce
from fkspectral.semigroup import KernelEvaluator, TruncationWarning
from fkspectral.spectral import solve_eigen

_BASES = {}


def solve(spec, grid=None, K=32, stencil=5):
    grid = grid or Grid()
    return solve_eigen(reduce(spec, grid), grid, K=K, stencil=stencil)


def hermite_basis(sigma=1.0, c=0.0, K=32):
    key = ("hermite", sigma, c, K)
    if key not in _BASES:
        _BASES[key] = solve(hermite.reduced_spec(hermite.HermiteModel(sigma, c)), K=K)
    return _BASES[key]


def oscillator_basis(sigma=1.0, K=32):
    key = ("oscillator", sigma, K)
    if key not in _BASES:
        _BASES[key] = solve(hermite.oscillator_spec(sigma), K=K)
    return _BASES[key]


def mehler(t, x, y, omega):
    """Kernel of exp(t (1/2 d^2 - omega^2 x^2 / 2))."""
    s, ch = math.sinh(omega * t), math.cosh(omega * t)
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.sqrt(omega / (2 * math.pi * s)) * np.exp(-omega * ((x * x + y * y) * ch - 2 * x * y) / (2 * s))


def hermite_ptilde(t, x, y, sigma, c):
    return math.exp((1 - 0.5 * c * c) * t) * mehler(t, x, y, sigma)


def hermite_p(t, x, y, sigma, c):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.exp(c * (x - y)) * hermite_ptilde(t, x, y, sigma, c)


@pytest.fixture(scope="session")
def grid():
    return Grid()


@pytest.fixture(scope="session")
def basis10():
    return hermite_basis(1.0, 0.0)


@pytest.fixture(scope="session")
def basis11():
    return hermite_basis(1.0, 1.0)


@pytest.fixture(scope="session")
def kern10(basis10):
    return KernelEvaluator(basis10)


@pytest.fixture(scope="session")
def kern11(basis11):
    return KernelEvaluator(basis11)


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {line}")
