import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdmmd import (
    ConfigError,
    CovarianceSpec,
    EntryDist,
    ModelSpec,
    NotPositiveSemiDefinite,
    Sampler,
    covariance_matrix,
    derive_rng,
    population_moments,
    sample,
)
from hdmmd.datagen import EntryKind, RootKind, Transform, factor_root, model_factor


def test_derive_rng_streams_are_reproducible_and_distinct():
    a = derive_rng(5, 1, 2).standard_normal(4)
    b = derive_rng(5, 1, 2).standard_normal(4)
    c = derive_rng(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    g = np.random.default_rng(0)
    assert derive_rng(g) is g


def test_sample_bit_identical_for_same_seed():
    spec = ModelSpec(p=7, covariance=CovarianceSpec.ar1(0.5))
    assert np.array_equal(sample(spec, 5, 11), sample(spec, 5, 11))
    assert not np.array_equal(sample(spec, 5, 11), sample(spec, 5, 12))


def test_ar1_and_banded_matrices():
    S = covariance_matrix(ModelSpec(p=5, covariance=CovarianceSpec.ar1(0.5)))
    assert S[0, 3] == 0.125 and S[4, 4] == 1.0
    B = covariance_matrix(ModelSpec(p=6, covariance=CovarianceSpec.banded(1.0, (0.25, 0.25))))
    assert B[0, 2] == 0.25 and B[0, 3] == 0.0 and B[2, 1] == 0.25


def test_banded_not_psd_rejected():
    spec = ModelSpec(p=20, covariance=CovarianceSpec.banded(1.0, (0.9, 0.9)))
    with pytest.raises(NotPositiveSemiDefinite):
        covariance_matrix(spec)


@pytest.mark.parametrize("root", ["cholesky", "symmetric"])
def test_factor_residual(root):
    spec = ModelSpec(p=30, covariance=CovarianceSpec.ar1(0.7), root=root)
    G = model_factor(spec)
    S = covariance_matrix(spec)
    assert np.max(np.abs(G @ G.T - S)) <= 1e-8
    if root == "symmetric":
        assert np.allclose(G, G.T)


def test_semidefinite_factor_falls_back_to_eigen_root():
    v = np.array([1.0, 2.0, 3.0])
    S = np.outer(v, v)
    G = factor_root(S, RootKind.CHOLESKY)
    assert np.max(np.abs(G @ G.T - S)) <= 1e-8


@pytest.mark.parametrize("kind, lam", [("std_normal", 1.0), ("centered_poisson", 1.0),
                                       ("centered_poisson", 4.0), ("centered_exponential", 1.0),
                                       ("rademacher", 1.0)])
def test_standardized_entry_moments(kind, lam):
    e = EntryDist(kind, lam=lam)
    x = e.draw(np.random.default_rng(3), 400_000)
    m, v, s, k = e.moments()
    assert (m, v) == (0.0, 1.0)
    se = 1 / math.sqrt(x.size)
    assert abs(x.mean()) < 5 * se
    assert abs(x.var() - 1) <= 5 * se * math.sqrt(2 + k) + 1e-6
    z = x - x.mean()
    assert np.mean(z**3) / np.var(x) ** 1.5 == pytest.approx(s, abs=0.05 * (1 + abs(s)))


def test_raw_poisson_and_shifted_normal_population_moments():
    p = 4
    X = ModelSpec(p=p, entry=EntryDist("shifted_normal", mean=1.0, var=1.0))
    Y = ModelSpec(p=p, entry=EntryDist("poisson", lam=1.0))
    mx, my = population_moments(X), population_moments(Y)
    assert np.allclose(mx.mean, 1) and np.allclose(my.mean, 1)
    assert np.allclose(mx.cov, np.eye(p)) and np.allclose(my.cov, np.eye(p))
    assert my.skewness == 1.0 and mx.skewness == 0.0
    draws = Sampler(Y)(200_000, 1)
    assert np.allclose(draws.mean(0), 1, atol=0.01)


def test_scaled_mean_survives_rescaling():
    spec = ModelSpec(p=8, mean=1 / math.sqrt(2), mean_p_power=-0.5)
    for p in (8, 200):
        mu = spec.with_dim(p).mean_vector()
        assert float(mu @ mu) == pytest.approx(0.5)


def test_dirichlet_and_sphere_constraints():
    D = sample(ModelSpec(p=50, transform="dirichlet"), 20, 0)
    assert np.allclose(D.sum(1), 50) and D.min() > 0
    S = sample(ModelSpec(p=50, transform="sphere"), 20, 0)
    assert np.allclose(np.linalg.norm(S, axis=1), math.sqrt(50))


def test_dirichlet_population_covariance_matches_simulation():
    p = 6
    spec = ModelSpec(p=p, transform=Transform.DIRICHLET)
    pm = population_moments(spec)
    X = sample(spec, 200_000, 2)
    assert np.allclose(np.cov(X.T), pm.cov, atol=0.02)
    assert np.allclose(X.mean(0), pm.mean, atol=0.01)


def test_linear_model_covariance_matches_simulation():
    spec = ModelSpec(p=5, entry=EntryDist("centered_exponential"),
                     covariance=CovarianceSpec.banded(1.0, (0.25, 0.25)), mean=1.0)
    pm = population_moments(spec)
    X = sample(spec, 200_000, 4)
    assert np.allclose(np.cov(X.T), pm.cov, atol=0.03)
    assert np.allclose(X.mean(0), pm.mean, atol=0.02)


def test_model_round_trip_json():
    spec = ModelSpec(p=9, entry=EntryDist("centered_poisson", lam=2.0),
                     covariance=CovarianceSpec.banded(1.0, (0.3,)), mean=0.5,
                     mean_p_power=-0.5, root="symmetric")
    assert ModelSpec.from_json(spec.to_json()) == spec
    vec = ModelSpec(p=3, mean=(1.0, 2.0, 3.0))
    assert ModelSpec.from_dict(vec.to_dict()) == vec


@pytest.mark.parametrize(
    "d, field",
    [({"p": 0}, "p"), ({"p": 3, "mean": [1, 2]}, "mean"), ({"p": 3, "colour": 1}, "model"),
     ({"p": 3, "entry": "cauchy"}, "entry"), ({"p": 3, "transform": "warp"}, "transform"),
     ({"p": 3, "covariance": {"kind": "ar1", "rho": 1.5}}, "covariance.rho")],
)
def test_model_validation_names_field(d, field):
    with pytest.raises(ConfigError) as exc:
        ModelSpec.from_dict(d)
    assert exc.value.field == field


@given(st.integers(1, 40), st.floats(-0.95, 0.95))
@settings(max_examples=40, deadline=None)
def test_ar1_factor_property(p, rho):
    spec = ModelSpec(p=p, covariance=CovarianceSpec.ar1(rho))
    G = model_factor(spec)
    assert np.max(np.abs(G @ G.T - covariance_matrix(spec))) <= 1e-8


def test_sampler_validation():
    with pytest.raises(ConfigError):
        Sampler(ModelSpec(p=3))(0, 1)
    assert EntryDist.from_dict("rademacher").kind is EntryKind.RADEMACHER
