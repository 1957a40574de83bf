import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import (
    brute_cross_trace,
    brute_within_trace,
    chen_qin_statistic,
    naive_mmd,
)
from hdmmd import (
    DegenerateVariance,
    DimensionMismatch,
    DomainError,
    KernelSpec,
    PooledGram,
    TooFewSamples,
    mmd_unbiased,
    squared_distance_block,
    tau_hats,
    trace_estimators,
    two_sample_test,
    variance_estimate,
)
from hdmmd.kernels import f_deriv

KERNELS = [
    KernelSpec.gaussian(6.0),
    KernelSpec.laplace(6.0),
    KernelSpec.rational_quadratic(0.5, 6.0),
    KernelSpec.energy(6.0),
    KernelSpec.linear(6.0),
]


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_mmd_matches_naive_loops(kernel, rng):
    X = rng.standard_normal((7, 3))
    Y = rng.standard_normal((5, 3)) * 1.5 + 0.3

    def k(a, b):
        return kernel(float(np.sum((a - b) ** 2)))

    assert mmd_unbiased(X, Y, kernel) == pytest.approx(naive_mmd(X, Y, k), rel=1e-11, abs=1e-13)


def test_mmd_symmetric_in_samples(rng):
    X = rng.standard_normal((9, 4))
    Y = rng.standard_normal((6, 4)) + 1
    for k in KERNELS:
        assert mmd_unbiased(X, Y, k) == mmd_unbiased(Y, X, k)


def test_mmd_is_permutation_invariant(rng):
    X = rng.standard_normal((8, 3))
    Y = rng.standard_normal((6, 3))
    k = KERNELS[0]
    a = mmd_unbiased(X, Y, k)
    b = mmd_unbiased(X[rng.permutation(8)], Y[rng.permutation(6)], k)
    assert a == pytest.approx(b, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_linear_kernel_reduces_to_mean_difference_statistic(seed):
    r = np.random.default_rng(seed)
    n, m, p = r.integers(3, 9), r.integers(3, 9), r.integers(1, 6)
    X = r.standard_normal((n, p))
    Y = r.standard_normal((m, p)) + r.standard_normal(p)
    gamma = float(r.uniform(0.5, 10))
    got = 0.5 * gamma * mmd_unbiased(X, Y, KernelSpec.linear(gamma))
    assert got == pytest.approx(chen_qin_statistic(X, Y), abs=1e-10)


@given(
    arrays(np.float64, (6, 3), elements=st.floats(-5, 5)),
    arrays(np.float64, (5, 3), elements=st.floats(-5, 5)),
)
@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_energy_statistic_matches_naive(X, Y):
    k = KernelSpec.energy(1.0)
    ref = naive_mmd(X, Y, lambda a, b: -math.sqrt(float(np.sum((a - b) ** 2))))
    assert mmd_unbiased(X, Y, k) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_squared_distance_block(rng):
    A = rng.standard_normal((4, 3))
    B = rng.standard_normal((5, 3))
    D = squared_distance_block(A, B)
    ref = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    assert np.allclose(D, ref, rtol=1e-12, atol=1e-12)
    assert np.all(squared_distance_block(A, A).diagonal() < 1e-12)


def test_tau_hats_match_mean_squared_distances(rng):
    n, m, p = 8, 6, 5
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal((m, p)) * 2 + 1
    t1, t2, t3 = tau_hats(X, Y)
    dxx = np.mean([np.sum((X[i] - X[j]) ** 2) for i in range(n) for j in range(n) if i != j])
    dyy = np.mean([np.sum((Y[i] - Y[j]) ** 2) for i in range(m) for j in range(m) if i != j])
    dxy = np.mean([np.sum((X[i] - Y[j]) ** 2) for i in range(n) for j in range(m)])
    assert (t1, t2, t3) == pytest.approx((dxx / p, dyy / p, dxy / p), rel=1e-12)


def test_trace_estimators_match_brute_force_u_statistics(rng):
    X = rng.standard_normal((7, 3)) @ rng.standard_normal((3, 3)) + 5.0
    Y = rng.standard_normal((6, 3)) - 2.0
    t11, t22, t12 = trace_estimators(X, Y)
    assert t11 == pytest.approx(brute_within_trace(X), rel=1e-10)
    assert t22 == pytest.approx(brute_within_trace(Y), rel=1e-10)
    assert t12 == pytest.approx(brute_cross_trace(X, Y), rel=1e-10)


def test_trace_estimators_translation_invariant(rng):
    X = rng.standard_normal((9, 4))
    Y = rng.standard_normal((8, 4))
    a = trace_estimators(X, Y)
    b = trace_estimators(X + 100.0, Y - 37.0)
    assert b == pytest.approx(a, rel=1e-8)


def test_trace_estimators_unbiased_with_nonzero_mean():
    # AR(1) covariance with a large common mean; exact traces are known
    p, n, reps = 6, 8, 4000
    idx = np.arange(p)
    S1 = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    S2 = np.diag(np.linspace(0.5, 2.0, p))
    L1, L2 = np.linalg.cholesky(S1), np.linalg.cholesky(S2)
    r = np.random.default_rng(7)
    vals = np.empty((reps, 3))
    for k in range(reps):
        X = r.standard_normal((n, p)) @ L1.T + 3.0
        Y = r.standard_normal((n, p)) @ L2.T + 3.0
        vals[k] = trace_estimators(X, Y)
    exact = np.array([np.sum(S1 * S1), np.sum(S2 * S2), np.sum(S1 * S2)])
    se = vals.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(vals.mean(axis=0) - exact) < 4 * se)


def test_variance_estimate_formula(rng):
    n, m, p = 10, 9, 20
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal((m, p))
    k = KernelSpec.gaussian(2 * p)
    t1, t2, t3 = tau_hats(X, Y)
    t11, t22, t12 = trace_estimators(X, Y)
    r = p / k.bandwidth
    d = [f_deriv(k, 1, r * t) for t in (t1, t2, t3)]
    ref = 8 / k.bandwidth**2 * (
        d[0] ** 2 * t11 / (n * (n - 1)) + d[1] ** 2 * t22 / (m * (m - 1))
        + 2 * d[2] ** 2 * t12 / (n * m)
    )
    assert variance_estimate(X, Y, k) == pytest.approx(ref, rel=1e-12)


def test_two_sample_test_result(rng):
    X = rng.standard_normal((30, 50))
    Y = rng.standard_normal((30, 50)) + 0.5
    k = KernelSpec.gaussian(100.0)
    res = two_sample_test(X, Y, k, alpha=0.05)
    assert res.reject and res.p_value < 1e-6
    assert res.z_score == pytest.approx(res.mmd_stat / math.sqrt(res.var_hat))
    d = res.to_dict()
    assert set(d) == {"mmd_stat", "var_hat", "z_score", "p_value", "reject", "alpha",
                      "tau_hats", "trace_hats"}


def test_pooled_gram_shares_work_across_kernels(rng):
    X = rng.standard_normal((12, 10))
    Y = rng.standard_normal((11, 10))
    pg = PooledGram(X, Y)
    for k in KERNELS[:4]:
        assert pg.mmd(k) == pytest.approx(mmd_unbiased(X, Y, k), rel=1e-13, abs=1e-15)


def test_input_validation(rng):
    X = rng.standard_normal((5, 3))
    with pytest.raises(DimensionMismatch):
        mmd_unbiased(X, rng.standard_normal((5, 4)), KERNELS[0])
    with pytest.raises(TooFewSamples):
        mmd_unbiased(X[:1], X, KERNELS[0])
    with pytest.raises(TooFewSamples):
        two_sample_test(X[:3], X, KERNELS[0])
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(DomainError):
        mmd_unbiased(bad, X, KERNELS[0])
    with pytest.raises(DimensionMismatch):
        mmd_unbiased(X.ravel(), X, KERNELS[0])
    with pytest.raises(DomainError):
        two_sample_test(X, X + 1, KERNELS[0], alpha=1.5)


def test_degenerate_variance():
    # identical points in each sample: all traces and distances vanish
    X = np.zeros((5, 3))
    Y = np.zeros((5, 3))
    res = two_sample_test(X, Y, KernelSpec.gaussian(1.0))
    assert res.var_hat == 0.0 and not res.reject and res.p_value == 1.0
    with pytest.raises(DegenerateVariance):
        variance_estimate(X, Y, KernelSpec.gaussian(1.0))
