"""Asymptotic quantities behind the studentized MMD test.

All formulas are written for a kernel ``f(d / gamma)``.  Expanding
``f(|X - X'|^2 / gamma)`` around ``p tau / gamma`` gives terms
``f^(s)(r tau) / (s! gamma^s) * (|X - X'|^2 - p tau)^s`` with ``r = p / gamma``,
so every derivative is evaluated at ``r * tau`` and every ``1 / p^s`` factor
of the ``gamma = p`` convention becomes ``1 / gamma^s``.

Quantities
----------
tau_params
    ``tau_i = 2 tr(Sigma_i) / p`` and ``tau_3 = (tr Sigma_1 + tr Sigma_2 +
    |mu_1 - mu_2|^2) / p``: rescaled mean squared distances.
delta0
    ``f(r tau_1) + f(r tau_2) - 2 f(r tau_3)``: zeroth-order term.
t1_exact, t1_frobenius, t1_general
    second-order mean term, exactly for the linear model, in the
    equal-mean/equal-trace Frobenius form, and by Monte Carlo.
ts_monte_carlo
    the order-``s`` mean term by Monte Carlo.
var_delta1_components
    variances of the three pieces of the first-order (Hajek-type) term.
power_local, power_higher_order
    normal-approximation power functions.
population_mmd_gaussian, population_mmd_monte_carlo
    population ``MMD^2`` in closed form (Gaussian data, Gaussian kernel) and
    by Monte Carlo.
h1, h2
    kernel- and bandwidth-impact ratios.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import datagen
from .errors import (
    ConfigError,
    DomainError,
    HypothesisViolated,
    MissingSummary,
    NotPositiveSemiDefinite,
    SingularMatrix,
    UnsupportedOrder,
)
from .kernels import Family, KernelSpec, f_deriv
from .normal import normal_cdf, normal_quantile

PSD_TOL = 1e-8
HYPOTHESIS_TOL = 1e-8


# --------------------------------------------------------------------------
# inputs


@dataclass(frozen=True)
class ReducedSummary:
    """Population summaries sufficient for the closed-form quantities.

    Fields left as ``None`` raise :class:`MissingSummary` when a formula
    needs them.  ``delta`` denotes ``mu_1 - mu_2``.
    """

    tr1: float | None = None
    tr2: float | None = None
    tr11: float | None = None  # tr(Sigma_1^2)
    tr22: float | None = None  # tr(Sigma_2^2)
    tr12: float | None = None  # tr(Sigma_1 Sigma_2)
    frob_diff: float | None = None  # |Sigma_1 - Sigma_2|_F^2
    delta_sigma1: float | None = None  # delta^T Sigma_1 delta
    delta_sigma2: float | None = None  # delta^T Sigma_2 delta
    delta_sq: float | None = None  # |delta|^2

    def need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingSummary(f"summary fields required but absent: {', '.join(missing)}")
        return tuple(float(getattr(self, n)) for n in names)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ReducedSummary":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "summary")
        return cls(**{k: (None if v is None else float(v)) for k, v in d.items()})


@dataclass(frozen=True)
class TheoryInput:
    """Population description of the pair ``(P_X, P_Y)``.

    Built from matrices (:meth:`from_matrices`), from two sampler models
    (:meth:`from_models`) or from reduced summaries (:meth:`from_summary`).

    ``kurt_term1 = sum_k kappa_k s_kk^2`` with ``s = Gamma_1^T Gamma_1`` and
    ``kappa`` the entry excess kurtosis (``kurt_term2`` likewise for ``Y``);
    ``skew_term = sum_k s_kk (Gamma_1^T delta)_k mu3_k - sum_k t_kk
    (Gamma_2^T delta)_k nu3_k``.  All three are 0 for Gaussian entries, which
    is the default when the entry distribution is unknown.
    """

    p: int
    summary: ReducedSummary
    mu1: np.ndarray | None = field(default=None, repr=False)
    mu2: np.ndarray | None = field(default=None, repr=False)
    Sigma1: np.ndarray | None = field(default=None, repr=False)
    Sigma2: np.ndarray | None = field(default=None, repr=False)
    kurt_term1: float = 0.0
    kurt_term2: float = 0.0
    skew_term: float = 0.0

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p!r}", "p")

    @classmethod
    def from_matrices(
        cls,
        mu1,
        Sigma1,
        mu2,
        Sigma2,
        *,
        factor1=None,
        factor2=None,
        kurtosis_excess=(0.0, 0.0),
        skewness=(0.0, 0.0),
    ) -> "TheoryInput":
        """Summaries from explicit moments.

        ``factor1``/``factor2`` are the standardized factors ``Gamma_i``;
        when given together with per-entry ``kurtosis_excess`` and
        ``skewness`` (scalars or per-column arrays) the fourth- and
        third-moment corrections are filled in.
        """
        mu1 = np.asarray(mu1, dtype=np.float64).ravel()
        mu2 = np.asarray(mu2, dtype=np.float64).ravel()
        S1 = _check_cov(Sigma1, "Sigma1")
        S2 = _check_cov(Sigma2, "Sigma2")
        p = mu1.size
        if mu2.size != p or S1.shape[0] != p or S2.shape[0] != p:
            raise ConfigError("inconsistent dimensions across mu1, mu2, Sigma1, Sigma2", "p")
        d = mu1 - mu2
        D = S1 - S2
        summary = ReducedSummary(
            tr1=float(np.trace(S1)),
            tr2=float(np.trace(S2)),
            tr11=float(np.sum(S1 * S1)),
            tr22=float(np.sum(S2 * S2)),
            tr12=float(np.sum(S1 * S2)),
            frob_diff=float(np.sum(D * D)),
            delta_sigma1=float(d @ S1 @ d),
            delta_sigma2=float(d @ S2 @ d),
            delta_sq=float(d @ d),
        )
        k1 = k2 = sk = 0.0
        if factor1 is not None:
            G1 = np.asarray(factor1, dtype=np.float64)
            s = np.sum(G1 * G1, axis=0)
            k1 = float(np.sum(np.broadcast_to(kurtosis_excess[0], s.shape) * s * s))
            sk += float(np.sum(np.broadcast_to(skewness[0], s.shape) * s * (G1.T @ d)))
        if factor2 is not None:
            G2 = np.asarray(factor2, dtype=np.float64)
            t = np.sum(G2 * G2, axis=0)
            k2 = float(np.sum(np.broadcast_to(kurtosis_excess[1], t.shape) * t * t))
            sk -= float(np.sum(np.broadcast_to(skewness[1], t.shape) * t * (G2.T @ d)))
        return cls(p, summary, mu1, mu2, S1, S2, k1, k2, sk)

    @classmethod
    def from_models(cls, model_x, model_y) -> "TheoryInput":
        """Exact summaries of two :class:`~hdmmd.datagen.ModelSpec` models."""
        if model_x.p != model_y.p:
            raise ConfigError("models have different dimensions", "p")
        mx = datagen.population_moments(model_x)
        my = datagen.population_moments(model_y)

        def _moments(m):
            if m.factor is None:
                return None, 0.0, 0.0
            return m.factor, m.excess_kurtosis, m.skewness

        f1, c1, g1 = _moments(mx)
        f2, c2, g2 = _moments(my)
        return cls.from_matrices(
            mx.mean, mx.cov, my.mean, my.cov,
            factor1=f1, factor2=f2, kurtosis_excess=(c1, c2), skewness=(g1, g2),
        )

    @classmethod
    def from_summary(cls, p, summary, *, kurt_term1=0.0, kurt_term2=0.0, skew_term=0.0):
        if isinstance(summary, dict):
            summary = ReducedSummary.from_dict(summary)
        return cls(int(p), summary, kurt_term1=kurt_term1, kurt_term2=kurt_term2,
                   skew_term=skew_term)


def _check_cov(S, name):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ConfigError(f"{name} must be a square matrix", name)
    if not np.allclose(S, S.T, rtol=0, atol=1e-10 * max(1.0, float(np.abs(S).max()))):
        raise NotPositiveSemiDefinite(f"{name} is not symmetric")
    if np.linalg.eigvalsh(S)[0] < -PSD_TOL:
        raise NotPositiveSemiDefinite(f"{name} has a negative eigenvalue")
    return S


def _r(ti: TheoryInput, kernel: KernelSpec) -> float:
    return ti.p / kernel.bandwidth


# --------------------------------------------------------------------------
# closed forms


def tau_params(ti: TheoryInput):
    """``(tau_1, tau_2, tau_3)``."""
    tr1, tr2, dsq = ti.summary.need("tr1", "tr2", "delta_sq")
    p = ti.p
    return 2.0 * tr1 / p, 2.0 * tr2 / p, (tr1 + tr2 + dsq) / p


def delta0(ti: TheoryInput, kernel: KernelSpec) -> float:
    """Zeroth-order term ``f(r tau_1) + f(r tau_2) - 2 f(r tau_3)``."""
    t1, t2, t3 = tau_params(ti)
    r = _r(ti, kernel)
    f = kernel.f
    return f(r * t1) + f(r * t2) - 2.0 * f(r * t3)


def t1_frobenius(ti: TheoryInput, kernel: KernelSpec) -> float:
    """``2 gamma^-2 f''(r tau) |Sigma_1 - Sigma_2|_F^2``.

    Valid when the means and the covariance traces coincide.

    Raises
    ------
    HypothesisViolated
        If ``|mu_1 - mu_2|^2`` or ``|tr Sigma_1 - tr Sigma_2|`` exceeds 1e-8
        (relative to the trace scale).
    """
    tr1, tr2, dsq, frob = ti.summary.need("tr1", "tr2", "delta_sq", "frob_diff")
    scale = max(1.0, abs(tr1), abs(tr2))
    if dsq > HYPOTHESIS_TOL * scale or abs(tr1 - tr2) > HYPOTHESIS_TOL * scale:
        raise HypothesisViolated("the Frobenius form needs equal means and equal traces")
    tau = 2.0 * tr1 / ti.p
    g = kernel.bandwidth
    return 2.0 / g**2 * f_deriv(kernel, 2, _r(ti, kernel) * tau) * frob


def squared_deviation_moments(ti: TheoryInput):
    """``(E_1, E_2, E_3)``: variances of ``|X-X'|^2``, ``|Y-Y'|^2``, ``|X-Y|^2``.

    Exact for the linear model with independent standardized entries; the
    third- and fourth-moment corrections come from the input's
    ``skew_term`` / ``kurt_term*`` (zero for Gaussian entries).
    """
    s = ti.summary
    tr11, tr22, tr12, ds1, ds2 = s.need("tr11", "tr22", "tr12", "delta_sigma1", "delta_sigma2")
    e1 = 8.0 * tr11 + 2.0 * ti.kurt_term1
    e2 = 8.0 * tr22 + 2.0 * ti.kurt_term2
    e3 = (
        2.0 * (tr11 + tr22 + 2.0 * tr12)
        + 4.0 * (ds1 + ds2)
        + ti.kurt_term1
        + ti.kurt_term2
        + 4.0 * ti.skew_term
    )
    return e1, e2, e3


def t1_exact(ti: TheoryInput, kernel: KernelSpec) -> float:
    """Second-order mean term from exact squared-deviation moments.

    ``(2 gamma^2)^-1 [f''(r tau_1) E_1 + f''(r tau_2) E_2 - 2 f''(r tau_3) E_3]``.
    Reduces to :func:`t1_frobenius` under equal means and traces.
    """
    t1, t2, t3 = tau_params(ti)
    e1, e2, e3 = squared_deviation_moments(ti)
    r = _r(ti, kernel)
    d2 = lambda t: f_deriv(kernel, 2, r * t)  # noqa: E731
    g = kernel.bandwidth
    return (d2(t1) * e1 + d2(t2) * e2 - 2.0 * d2(t3) * e3) / (2.0 * g * g)


def var_delta1_components(ti: TheoryInput, kernel: KernelSpec, n: int, m: int):
    """``(v11, v12, v13)``: variances of the three first-order pieces.

    ``v11`` is the degenerate (null) part, ``v12`` the mean-difference part
    and ``v13`` the trace-difference part; the pieces are uncorrelated so
    ``var(Delta_1) = v11 + v12 + v13``.  ``v13`` uses the input's kurtosis
    terms (0, i.e. Gaussian, by default).
    """
    if n < 2 or m < 2:
        raise ConfigError(f"need n, m >= 2, got n={n}, m={m}", "n")
    s = ti.summary
    tr11, tr22, tr12, ds1, ds2 = s.need("tr11", "tr22", "tr12", "delta_sigma1", "delta_sigma2")
    t1, t2, t3 = tau_params(ti)
    r = _r(ti, kernel)
    g2 = kernel.bandwidth**2
    a1 = f_deriv(kernel, 1, r * t1)
    a2 = f_deriv(kernel, 1, r * t2)
    a3 = f_deriv(kernel, 1, r * t3)
    v11 = 8.0 / g2 * (
        a1 * a1 * tr11 / (n * (n - 1))
        + a2 * a2 * tr22 / (m * (m - 1))
        + 2.0 * a3 * a3 * tr12 / (n * m)
    )
    v12 = 16.0 / g2 * a3 * a3 * (ds1 / n + ds2 / m)
    v13 = 4.0 / g2 * (
        (a1 - a3) ** 2 * (2.0 * tr11 + ti.kurt_term1) / n
        + (a2 - a3) ** 2 * (2.0 * tr22 + ti.kurt_term2) / m
    )
    return v11, v12, v13


# --------------------------------------------------------------------------
# power


def _power(signal, var_d1, alpha):
    if not var_d1 > 0:
        raise DomainError(f"variance must be positive, got {var_d1}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return normal_cdf(-normal_quantile(1.0 - alpha) + signal / math.sqrt(var_d1))


def power_local(delta0_value: float, t1_value: float, var_d1: float, alpha: float) -> float:
    """``Phi(-z_{1-alpha} + (Delta_0 + T_1) / sqrt(var))``."""
    return _power(delta0_value + t1_value, var_d1, alpha)


def power_higher_order(mmd_pop: float, var_d1: float, alpha: float) -> float:
    """``Phi(-z_{1-alpha} + MMD^2 / sqrt(var))``."""
    return _power(mmd_pop, var_d1, alpha)


class Regime(Enum):
    LOCAL_S1 = "local_s1"
    HIGHER_ORDER_S2 = "higher_order_s2"


@dataclass
class PowerPrediction:
    """Predicted power at one ``(n, m)``.

    ``power_band`` brackets the prediction when the signal itself is a
    Monte Carlo estimate: it is the power at ``signal -/+ 3 SE``.
    """

    delta0: float
    t1: float
    var_delta1: float
    predicted_power: float
    regime: Regime
    alpha: float
    n: int
    m: int
    signal: float
    signal_se: float = 0.0
    power_band: tuple = (math.nan, math.nan)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        d["power_band"] = list(self.power_band)
        return d


def predict_power(
    ti: TheoryInput,
    kernel: KernelSpec,
    n: int,
    m: int,
    alpha: float = 0.05,
    *,
    regime: Regime = Regime.LOCAL_S1,
    mmd_pop: float | None = None,
    mmd_se: float = 0.0,
    full_variance: bool = False,
    band_width: float = 3.0,
) -> PowerPrediction:
    """Power prediction under local (first two moments) or higher-order
    alternatives.

    The variance defaults to the leading degenerate component ``v11``;
    ``full_variance=True`` adds ``v12 + v13``.
    """
    regime = Regime(regime)
    v11, v12, v13 = var_delta1_components(ti, kernel, n, m)
    var = v11 + v12 + v13 if full_variance else v11
    d0 = delta0(ti, kernel)
    t1 = t1_exact(ti, kernel)
    if regime is Regime.LOCAL_S1:
        signal, se = d0 + t1, 0.0
    else:
        if mmd_pop is None:
            raise MissingSummary("higher-order regime needs the population MMD")
        signal, se = float(mmd_pop), float(mmd_se)
    pw = power_higher_order(signal, var, alpha)
    band = (
        power_higher_order(signal - band_width * se, var, alpha),
        power_higher_order(signal + band_width * se, var, alpha),
    )
    return PowerPrediction(d0, t1, var, pw, regime, alpha, n, m, signal, se, band)


# --------------------------------------------------------------------------
# population MMD


def _gauss_expect(delta, S, gamma):
    """``E exp(-|Z|^2 / gamma)`` for ``Z ~ N(delta, S)``."""
    p = S.shape[0]
    A = np.eye(p) + (2.0 / gamma) * S
    sign, logdet = np.linalg.slogdet(A)
    if sign <= 0:
        raise SingularMatrix("I + 2S/gamma is not positive definite")
    quad = float(delta @ np.linalg.solve(gamma * np.eye(p) + 2.0 * S, delta)) if delta is not None else 0.0
    return math.exp(-0.5 * logdet - quad)


def population_mmd_gaussian(mu1, Sigma1, mu2, Sigma2, gamma: float) -> float:
    """Population ``MMD^2`` for Gaussian data and the Gaussian kernel.

    Uses ``E exp(-|Z|^2/gamma) = det(I + 2S/gamma)^(-1/2)
    exp(-delta^T (gamma I + 2S)^(-1) delta)`` with ``Z ~ N(delta, S)`` applied
    to ``X - X'``, ``Y - Y'`` and ``X - Y``.
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    S1 = _check_cov(np.atleast_2d(Sigma1), "Sigma1")
    S2 = _check_cov(np.atleast_2d(Sigma2), "Sigma2")
    kxx = _gauss_expect(None, 2.0 * S1, gamma)
    kyy = _gauss_expect(None, 2.0 * S2, gamma)
    kxy = _gauss_expect(mu1 - mu2, S1 + S2, gamma)
    return kxx + kyy - 2.0 * kxy


def _batch_size(reps, batch):
    if batch is not None:
        return max(2, int(batch))
    return int(min(256, max(16, reps // 50)))


def _batched(gen1, gen2, reps, seed, batch, fn):
    """Average ``fn(X, Y)`` over independent batches; returns ``(mean, se)``.

    Each batch holds ``b`` fresh rows from each model and ``fn`` returns a
    within-batch U-statistic, so batch values are i.i.d. unbiased estimates.
    """
    if reps < 2:
        raise ConfigError("reps must be at least 2", "reps")
    b = _batch_size(reps, batch)
    nb = max(2, -(-reps // b))
    sx = datagen.Sampler(gen1)
    sy = datagen.Sampler(gen2)
    vals = np.empty(nb)
    for k in range(nb):
        X = sx(b, datagen.derive_rng(seed, k, 0))
        Y = sy(b, datagen.derive_rng(seed, k, 1))
        vals[k] = fn(X, Y)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(nb))


def _pair_sqdists(X, Y):
    """Upper-triangle ``X``-pairs, ``Y``-pairs and all cross pairs."""
    nx = np.einsum("ij,ij->i", X, X)
    ny = np.einsum("ij,ij->i", Y, Y)
    iu = np.triu_indices(X.shape[0], k=1)
    ju = np.triu_indices(Y.shape[0], k=1)
    dxx = (nx[:, None] + nx[None, :] - 2.0 * X @ X.T)[iu]
    dyy = (ny[:, None] + ny[None, :] - 2.0 * Y @ Y.T)[ju]
    dxy = (nx[:, None] + ny[None, :] - 2.0 * X @ Y.T).ravel()
    return np.maximum(dxx, 0.0), np.maximum(dyy, 0.0), np.maximum(dxy, 0.0)


def population_mmd_monte_carlo(gen1, gen2, kernel: KernelSpec, reps: int = 100_000,
                               seed=0, batch=None):
    """Monte Carlo ``E k(X,X') + E k(Y,Y') - 2 E k(X,Y)`` with its SE.

    ``reps`` is the number of draws from each model.  The first-order Taylor
    term ``f'(r tau_i) (D_i - p tau_i) / gamma`` has mean exactly zero (the
    ``tau_i`` are exact population values), so it is subtracted as a control
    variate; this removes the dominant sampling noise without bias.  When
    both models are linear the second-order term is treated the same way,
    its exact mean :func:`t1_exact` being added back.
    """
    ti = TheoryInput.from_models(gen1, gen2)
    taus = tau_params(ti)
    r = _r(ti, kernel)
    g = kernel.bandwidth
    slopes = [f_deriv(kernel, 1, r * t) / g for t in taus]
    centers = [ti.p * t for t in taus]
    linear = all(m.transform is datagen.Transform.LINEAR for m in (gen1, gen2))
    if linear:
        curv = [f_deriv(kernel, 2, r * t) / (2.0 * g * g) for t in taus]
        offset = t1_exact(ti, kernel)
    else:
        curv = [0.0, 0.0, 0.0]
        offset = 0.0

    def fn(X, Y):
        dxx, dyy, dxy = _pair_sqdists(X, Y)
        terms = []
        for d, a, b, c in zip((dxx, dyy, dxy), slopes, curv, centers):
            u = d - c
            terms.append(np.mean(kernel(d) - a * u - b * u * u))
        return terms[0] + terms[1] - 2.0 * terms[2]

    est, se = _batched(gen1, gen2, reps, seed, batch, fn)
    return est + offset, se


def ts_monte_carlo(s: int, gen1, gen2, kernel: KernelSpec, reps: int = 100_000, seed=0,
                   batch=None):
    """Monte Carlo order-``s`` mean term with its SE.

    ``sum_i w_i E(D_i - p tau_i)^s`` over ``D_1 = |X-X'|^2``,
    ``D_2 = |Y-Y'|^2`` and ``D_3 = |X-Y|^2`` with weights
    ``f^(s)(r tau_i) / (s! gamma^s)`` times ``(1, 1, -2)``; the exact
    population ``tau_i`` come from the models.  With equal first moments
    all three ``tau_i`` coincide.
    """
    if not isinstance(s, (int, np.integer)) or s < 1 or s > 4:
        raise UnsupportedOrder(f"order s must be in 1..4, got {s}")
    ti = TheoryInput.from_models(gen1, gen2)
    taus = tau_params(ti)
    p = ti.p
    r = _r(ti, kernel)
    c = math.factorial(s) * kernel.bandwidth**s
    w = [f_deriv(kernel, s, r * t) / c for t in taus]
    centers = [p * t for t in taus]

    def fn(X, Y):
        dxx, dyy, dxy = _pair_sqdists(X, Y)
        return (
            w[0] * np.mean((dxx - centers[0]) ** s)
            + w[1] * np.mean((dyy - centers[1]) ** s)
            - 2.0 * w[2] * np.mean((dxy - centers[2]) ** s)
        )

    return _batched(gen1, gen2, reps, seed, batch, fn)


def t1_general(gen1, gen2, kernel: KernelSpec, reps: int = 100_000, seed=0, batch=None):
    """Monte Carlo second-order mean term (``s = 2``) with its SE."""
    return ts_monte_carlo(2, gen1, gen2, kernel, reps, seed, batch)


# --------------------------------------------------------------------------
# kernel impact


def h1(kernel: KernelSpec, tau: float) -> float:
    """``f''(tau) / |f'(tau)|`` (the profile only; bandwidth is ignored)."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    return f_deriv(kernel, 2, tau) / abs(f_deriv(kernel, 1, tau))


def h2(kernel: KernelSpec, gamma: float, trSigma1: float) -> float:
    """``f''(C/gamma) / (|f'(C/gamma)| gamma)`` with ``C = 2 tr(Sigma_1)``."""
    if not gamma > 0 or not trSigma1 > 0:
        raise DomainError("gamma and tr(Sigma_1) must be positive")
    x = 2.0 * trSigma1 / gamma
    return f_deriv(kernel, 2, x) / (abs(f_deriv(kernel, 1, x)) * gamma)


def h2_closed_form(kernel: KernelSpec, gamma: float, trSigma1: float) -> float:
    """Closed forms of :func:`h2` per family (linear has ``f'' = 0``)."""
    C = 2.0 * trSigma1
    fam = kernel.family
    if fam is Family.GAUSSIAN:
        return 1.0 / gamma
    if fam is Family.LAPLACE:
        return 0.5 * ((C * gamma) ** -0.5 + 1.0 / C)
    if fam is Family.RATIONAL_QUADRATIC:
        return (kernel.alpha + 1.0) / (gamma + C)
    if fam is Family.ENERGY:
        return 1.0 / (2.0 * C)
    return 0.0
