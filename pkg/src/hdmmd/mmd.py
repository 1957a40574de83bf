"""Unbiased MMD statistic, plug-in variance estimator and studentized test.

Everything is computed from one pooled Gram matrix ``Z Z^T`` with
``Z = [X; Y]``: squared distances, the within/cross kernel sums, the
leave-one-out ``tau`` estimators and the unbiased trace estimators.  The
Gram matrix and kernel sums come from the compiled core when available.

With a bandwidth ``gamma`` the kernel is ``f(d / gamma)``.  Writing
``r = p / gamma``, the variance estimator is evaluated as

    8 / gamma^2 * [ f'(r t1)^2 T11 / (n(n-1)) + f'(r t2)^2 T22 / (m(m-1))
                    + 2 f'(r t3)^2 T12 / (n m) ]

which reduces to the ``8 / p^2`` form when ``gamma = p``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    DomainError,
    TooFewSamples,
)
from .kernels import KernelSpec, f_deriv
from .normal import normal_quantile, normal_sf


def as_sample_matrix(X, name="X") -> np.ndarray:
    """Validate an ``n x p`` block of observations (row = observation)."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D array, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise TooFewSamples(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(A)


def _check_pair(X, Y, min_rows):
    X = as_sample_matrix(X, "X")
    Y = as_sample_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"X has p={X.shape[1]} columns but Y has p={Y.shape[1]}")
    if X.shape[0] < min_rows or Y.shape[0] < min_rows:
        raise TooFewSamples(
            f"need at least {min_rows} rows per sample, got n={X.shape[0]}, m={Y.shape[0]}"
        )
    return X, Y


def squared_distance_block(A, B, nthreads=None) -> np.ndarray:
    """Matrix of ``|A_i - B_j|^2``, negatives from round-off clamped to 0."""
    A = as_sample_matrix(A, "A")
    B = as_sample_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"A has p={A.shape[1]} columns but B has p={B.shape[1]}")
    core = _backend.core
    nt = _backend.default_threads() if nthreads is None else nthreads
    C = core.gram(A, B, nt)
    return core.sqdist_from_gram(C, core.sq_norms(A), core.sq_norms(B))


@dataclass
class TestResult:
    """Outcome of the one-sided studentized MMD test."""

    __test__ = False  # not a pytest class

    mmd_stat: float
    var_hat: float
    z_score: float
    p_value: float
    reject: bool
    alpha: float
    tau_hats: tuple
    trace_hats: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_hats"] = list(self.tau_hats)
        d["trace_hats"] = list(self.trace_hats)
        return d


class PooledGram:
    """Pooled Gram matrix of two samples plus the derived sufficient sums.

    Build once per ``(X, Y)`` pair and query several kernels cheaply; the
    Monte Carlo engine relies on this to share replicates across kernels.
    """

    def __init__(self, X, Y, nthreads=None, *, min_rows=2, backend=None):
        X, Y = _check_pair(X, Y, min_rows)
        self.n, self.p = X.shape
        self.m = Y.shape[0]
        self.nthreads = _backend.default_threads() if nthreads is None else int(nthreads)
        self._core = _backend.get_core(backend)
        Z = np.ascontiguousarray(np.vstack([X, Y]))
        self.G = self._core.gram(Z, None, self.nthreads)
        self._tau = None
        self._traces = None

    # kernel statistic -------------------------------------------------------

    def kernel_sums(self, kernel: KernelSpec):
        """``(S_xx, S_yy, S_xy)``: sums over ``i < j`` within each sample and
        over all cross pairs."""
        n = self.n
        within, cross = self._core.kernel_row_sums(
            self.G, n, kernel.code, kernel.param, kernel.bandwidth, self.nthreads
        )
        s_xx = math.fsum(within[:n])
        s_yy = math.fsum(within[n:])
        # Row sums of the cross block plus column sums: swapping X and Y
        # permutes the two terms, which keeps the statistic exactly symmetric.
        s_xy = 0.5 * (math.fsum(cross[:n]) + math.fsum(cross[n:]))
        return s_xx, s_yy, s_xy

    def mmd(self, kernel: KernelSpec) -> float:
        n, m = self.n, self.m
        s_xx, s_yy, s_xy = self.kernel_sums(kernel)
        within = 2.0 * s_xx / (n * (n - 1)) + 2.0 * s_yy / (m * (m - 1))
        return within - 2.0 * s_xy / (n * m)

    # moment estimators ------------------------------------------------------

    def tau_hats(self):
        """Leave-one-out estimators of ``(tau_1, tau_2, tau_3)``."""
        if self._tau is None:
            n, m, p = self.n, self.m, self.p
            G = self.G
            gx, gy = G[:n, :n], G[n:, n:]
            dx, dy = np.diagonal(gx), np.diagonal(gy)
            sx, sy = gx.sum(axis=1), gy.sum(axis=1)
            # X_i^T (X_i - Xbar_{-i}) with Xbar_{-i}^T X_i = (s_i - G_ii) / (n - 1)
            ax = float(np.mean(dx - (sx - dx) / (n - 1)))
            ay = float(np.mean(dy - (sy - dy) / (m - 1)))
            uxx = float(sx.sum() - dx.sum()) / (n * (n - 1))
            uyy = float(sy.sum() - dy.sum()) / (m * (m - 1))
            cxy = float(G[:n, n:].sum()) / (n * m)
            t1 = 2.0 * ax / p
            t2 = 2.0 * ay / p
            t3 = (ax + ay + uxx + uyy - 2.0 * cxy) / p
            # Each is a mean squared distance / p, hence >= 0 up to round-off.
            self._tau = (max(t1, 0.0), max(t2, 0.0), max(t3, 0.0))
        return self._tau

    def trace_estimates(self):
        """Unbiased estimators of ``tr(S1^2), tr(S2^2), tr(S1 S2)``.

        The within-sample traces are the four-index U-statistics with kernel
        ``((X_i - X_j)^T (X_k - X_l))^2 / 4``; the cross trace pairs
        ``(X_j - Xbar_(j))^T Y_k`` with ``(Y_k - Ybar_(k))^T X_j``.  All three
        are exactly location invariant, so they are evaluated on Gram blocks
        centered by the sample means, which keeps the sums well conditioned.
        """
        if self._traces is None:
            n, m = self.n, self.m
            if n < 4 or m < 4:
                raise TooFewSamples(f"trace estimators need n, m >= 4, got n={n}, m={m}")
            G = self.G
            gx, gy, C = G[:n, :n], G[n:, n:], G[:n, n:]
            rx, ry = gx.mean(axis=1), gy.mean(axis=1)
            t11 = _within_trace(gx - rx[:, None] - rx[None, :] + rx.mean())
            t22 = _within_trace(gy - ry[:, None] - ry[None, :] + ry.mean())
            cx, cy = C.mean(axis=1), C.mean(axis=0)
            Cc = C - cx[:, None] - cy[None, :] + cx.mean()
            # centred cross block has zero row/column sums, so the leave-one-out
            # corrections reduce to the factors n/(n-1) and m/(m-1)
            t12 = float(np.einsum("ij,ij->", Cc, Cc)) / ((n - 1) * (m - 1))
            self._traces = (t11, t22, t12)
        return self._traces

    def variance(self, kernel: KernelSpec) -> float:
        n, m, p = self.n, self.m, self.p
        t1, t2, t3 = self.tau_hats()
        t11, t22, t12 = (max(t, 0.0) for t in self.trace_estimates())
        r = p / kernel.bandwidth
        d1 = f_deriv(kernel, 1, r * t1)
        d2 = f_deriv(kernel, 1, r * t2)
        d3 = f_deriv(kernel, 1, r * t3)
        bracket = (
            d1 * d1 * t11 / (n * (n - 1))
            + d2 * d2 * t22 / (m * (m - 1))
            + 2.0 * d3 * d3 * t12 / (n * m)
        )
        var = 8.0 / kernel.bandwidth**2 * bracket
        if not var > 0.0:
            raise DegenerateVariance("variance estimate is zero")
        return var

    def test(self, kernel: KernelSpec, alpha: float = 0.05) -> TestResult:
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
        stat = self.mmd(kernel)
        try:
            var = self.variance(kernel)
        except DegenerateVariance:
            if stat > 0:
                raise DegenerateVariance(
                    "variance estimate is zero with a positive statistic; z is undefined"
                ) from None
            return TestResult(
                mmd_stat=stat, var_hat=0.0, z_score=-math.inf, p_value=1.0,
                reject=False, alpha=alpha, tau_hats=self.tau_hats(),
                trace_hats=self.trace_estimates(),
            )
        z = stat / math.sqrt(var)
        return TestResult(
            mmd_stat=stat,
            var_hat=var,
            z_score=z,
            p_value=normal_sf(z),
            reject=bool(z > normal_quantile(1.0 - alpha)),
            alpha=alpha,
            tau_hats=self.tau_hats(),
            trace_hats=self.trace_estimates(),
        )


def _within_trace(kc: np.ndarray) -> float:
    """Four-index U-statistic for ``tr(S^2)`` from a centred Gram block.

    With ``K`` the block with its diagonal zeroed, ``r = K 1`` and
    ``s = 1^T K 1``, the sums over distinct index tuples are
    ``sum K_ij^2``, ``|r|^2 - sum K_ij^2`` and ``s^2 - 4|r|^2 + 2 sum K_ij^2``.
    """
    n = kc.shape[0]
    d = np.diagonal(kc)
    # rows of the centred block sum to zero, so off-diagonal row sums are -d
    r = -d
    f2 = float(np.einsum("ij,ij->", kc, kc) - d @ d)
    r2 = float(r @ r)
    s = float(r.sum())
    a = f2 / (n * (n - 1))
    b = (r2 - f2) / (n * (n - 1) * (n - 2))
    c = (s * s - 4.0 * r2 + 2.0 * f2) / (n * (n - 1) * (n - 2) * (n - 3))
    return a - 2.0 * b + c


def mmd_unbiased(X, Y, kernel: KernelSpec, nthreads=None) -> float:
    """Unbiased two-sample U-statistic estimate of ``MMD^2``."""
    return PooledGram(X, Y, nthreads).mmd(kernel)


def tau_hats(X, Y, nthreads=None):
    return PooledGram(X, Y, nthreads).tau_hats()


def trace_estimators(X, Y, nthreads=None):
    X, Y = _check_pair(X, Y, 4)
    return PooledGram(X, Y, nthreads).trace_estimates()


def variance_estimate(X, Y, kernel: KernelSpec, nthreads=None) -> float:
    X, Y = _check_pair(X, Y, 4)
    return PooledGram(X, Y, nthreads).variance(kernel)


def two_sample_test(X, Y, kernel: KernelSpec, alpha: float = 0.05, nthreads=None) -> TestResult:
    """Reject ``H0: P_X = P_Y`` when ``MMD^2 / sqrt(var_hat) > z_{1-alpha}``."""
    X, Y = _check_pair(X, Y, 4)
    return PooledGram(X, Y, nthreads).test(kernel, alpha)
