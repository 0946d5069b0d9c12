import math

import numpy as np
import pytest

from conefbp.ode import symmetric_solution


def legendre_series(lam, phi, terms=6000):
    """Power series in sin^2(phi/2) solving f'' + cot f' + lam f = 0, f(0)=1.

    Independent of the package integrator: a_{k+1} = a_k (k(k+1) - lam)
    / (k+1)^2 against s^k with s = sin^2(phi/2).
    """
    s = math.sin(0.5 * phi) ** 2
    total = 1.0
    a = 1.0
    for k in range(terms):
        a *= (k * (k + 1) - lam) / ((k + 1) * (k + 1))
        term = a * s ** (k + 1)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def series_zero(lam, lo, hi, iters=100):
    """Bisection zero of the series solution; oracle for first_zero."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if legendre_series(lam, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="session")
def sol01():
    return symmetric_solution(0.1)


@pytest.fixture(scope="session")
def sol03():
    return symmetric_solution(0.3)


@pytest.fixture(scope="session")
def sol05():
    return symmetric_solution(0.5)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
