"""Shared fixtures and independent reference implementations.

The helpers here are deliberately naive (explicit loops over index tuples)
so they can serve as oracles for the vectorized library code.
"""

import itertools
import math

import numpy as np
import pytest

from hdmmd import datagen


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_mmd(X, Y, k):
    """Two-sample U-statistic by explicit double loops; ``k(x, y)`` scalar."""
    n, m = len(X), len(Y)
    sxx = sum(k(X[i], X[j]) for i in range(n) for j in range(n) if i != j)
    syy = sum(k(Y[i], Y[j]) for i in range(m) for j in range(m) if i != j)
    sxy = sum(k(X[i], Y[j]) for i in range(n) for j in range(m))
    return sxx / (n * (n - 1)) + syy / (m * (m - 1)) - 2.0 * sxy / (n * m)


def chen_qin_statistic(X, Y):
    """Classical mean-difference statistic coded from its definition."""
    n, m = len(X), len(Y)
    a = sum(X[i] @ X[j] for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    b = sum(Y[i] @ Y[j] for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    c = sum(X[i] @ Y[j] for i in range(n) for j in range(m)) / (n * m)
    return a + b - 2.0 * c


def brute_within_trace(X):
    """Average of ``((Xi - Xj)^T (Xk - Xl))^2 / 4`` over distinct 4-tuples."""
    n = len(X)
    tot, cnt = 0.0, 0
    for i, j, k, l in itertools.permutations(range(n), 4):
        tot += 0.25 * ((X[i] - X[j]) @ (X[k] - X[l])) ** 2
        cnt += 1
    return tot / cnt


def brute_cross_trace(X, Y):
    """Average of ``((Xi - Xj)^T (Yk - Yl))^2 / 4`` over ``i != j``, ``k != l``."""
    tot, cnt = 0.0, 0
    for i, j in itertools.permutations(range(len(X)), 2):
        for k, l in itertools.permutations(range(len(Y)), 2):
            tot += 0.25 * ((X[i] - X[j]) @ (Y[k] - Y[l])) ** 2
            cnt += 1
    return tot / cnt


def normal_model(p, **kw):
    return datagen.ModelSpec(p=p, **kw)


def ar1(rho):
    return datagen.CovarianceSpec.ar1(rho)


def binomial_band(p0, n, z=2.5758293035489):
    """Two-sided normal-approximation band for a binomial proportion."""
    h = z * math.sqrt(p0 * (1 - p0) / n)
    return p0 - h, p0 + h


# --------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion, shown after the run

ACCEPTANCE_LINES = []


def report_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
