"""Reproducible samplers for high-dimensional two-sample experiments.

Three transforms are supported:

* ``linear`` -- rows ``X = Gamma U + mu`` with ``Gamma Gamma^T = Sigma`` and
  ``U`` a vector of i.i.d. entries from a chosen entry distribution;
* ``dirichlet`` -- rows ``p * Dirichlet(1, ..., 1)`` (compositional data);
* ``sphere`` -- rows uniform on the sphere of radius ``sqrt(p)``.

Randomness comes from numpy's PCG64 generator.  Per-replicate streams are
derived from ``(seed, *keys)`` through :class:`numpy.random.SeedSequence`
spawn keys, so a stream depends only on its coordinates and never on the
order in which workers consume them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, NotPositiveSemiDefinite

PSD_TOL = 1e-8


# --------------------------------------------------------------------------
# random streams


def derive_rng(seed, *keys) -> np.random.Generator:
    """Independent PCG64 stream for the coordinates ``keys`` under ``seed``."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# entry distributions


class EntryKind(Enum):
    STD_NORMAL = "std_normal"
    CENTERED_POISSON = "centered_poisson"
    CENTERED_EXPONENTIAL = "centered_exponential"
    RADEMACHER = "rademacher"
    SHIFTED_NORMAL = "shifted_normal"
    POISSON = "poisson"


@dataclass(frozen=True)
class EntryDist:
    """Distribution of the i.i.d. entries of ``U``.

    The ``centered_*`` kinds and ``rademacher`` are standardized (mean 0,
    variance 1): ``(Poisson(lam) - lam) / sqrt(lam)`` and
    ``(Exp(rate) - 1/rate) * rate``.  ``shifted_normal`` and ``poisson`` are
    raw; their mean and scale are folded into ``mu`` and ``Gamma`` when
    population moments are computed.
    """

    kind: EntryKind = EntryKind.STD_NORMAL
    lam: float = 1.0
    rate: float = 1.0
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", EntryKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown entry distribution {self.kind!r}", "entry") from None
        for name in ("lam", "rate", "var"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v}", f"entry.{name}")

    def moments(self):
        """``(mean, variance, skewness, excess kurtosis)`` of one entry."""
        k = self.kind
        if k in (EntryKind.STD_NORMAL,):
            return 0.0, 1.0, 0.0, 0.0
        if k is EntryKind.CENTERED_POISSON:
            return 0.0, 1.0, 1.0 / math.sqrt(self.lam), 1.0 / self.lam
        if k is EntryKind.CENTERED_EXPONENTIAL:
            return 0.0, 1.0, 2.0, 6.0
        if k is EntryKind.RADEMACHER:
            return 0.0, 1.0, 0.0, -2.0
        if k is EntryKind.SHIFTED_NORMAL:
            return self.mean, self.var, 0.0, 0.0
        return self.lam, self.lam, 1.0 / math.sqrt(self.lam), 1.0 / self.lam

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        k = self.kind
        if k is EntryKind.STD_NORMAL:
            return rng.standard_normal(shape)
        if k is EntryKind.CENTERED_POISSON:
            return (rng.poisson(self.lam, shape) - self.lam) / math.sqrt(self.lam)
        if k is EntryKind.CENTERED_EXPONENTIAL:
            return rng.standard_exponential(shape) - 1.0
        if k is EntryKind.RADEMACHER:
            return 2.0 * rng.integers(0, 2, shape).astype(np.float64) - 1.0
        if k is EntryKind.SHIFTED_NORMAL:
            return self.mean + math.sqrt(self.var) * rng.standard_normal(shape)
        return rng.poisson(self.lam, shape).astype(np.float64)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        k = self.kind
        if k in (EntryKind.CENTERED_POISSON, EntryKind.POISSON):
            d["lam"] = self.lam
        elif k is EntryKind.SHIFTED_NORMAL:
            d.update(mean=self.mean, var=self.var)
        return d

    @classmethod
    def from_dict(cls, d) -> "EntryDist":
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        allowed = {"kind", "lam", "rate", "mean", "var"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "entry")
        if "kind" not in d:
            raise ConfigError("missing 'kind'", "entry")
        return cls(**d)


# --------------------------------------------------------------------------
# covariance structures


class CovKind(Enum):
    IDENTITY = "identity"
    AR1 = "ar1"
    BANDED = "banded"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class CovarianceSpec:
    """``identity``, ``ar1`` (``rho^|i-j|``), ``banded`` (``diag`` on the
    diagonal, ``band_values[k-1]`` at offset ``k <= width``) or an explicit
    matrix."""

    kind: CovKind = CovKind.IDENTITY
    rho: float = 0.0
    diag: float = 1.0
    band_values: tuple = ()
    width: int = 0
    matrix: tuple | None = None

    def __post_init__(self):
        try:
            kind = CovKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown covariance {self.kind!r}", "covariance") from None
        object.__setattr__(self, "kind", kind)
        if kind is CovKind.AR1 and not abs(self.rho) < 1:
            raise ConfigError(f"AR1 needs |rho| < 1, got {self.rho}", "covariance.rho")
        if kind is CovKind.BANDED:
            vals = tuple(float(v) for v in np.atleast_1d(self.band_values))
            width = int(self.width) if self.width else len(vals)
            if len(vals) == 1 and width > 1:
                vals = vals * width
            if len(vals) != width or width < 0:
                raise ConfigError("band_values must have one value per offset", "covariance")
            if not self.diag > 0:
                raise ConfigError("diag must be positive", "covariance.diag")
            object.__setattr__(self, "band_values", vals)
            object.__setattr__(self, "width", width)
        if kind is CovKind.EXPLICIT:
            if self.matrix is None:
                raise ConfigError("explicit covariance needs a matrix", "covariance.matrix")
            M = np.asarray(self.matrix, dtype=np.float64)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ConfigError("matrix must be square", "covariance.matrix")
            object.__setattr__(self, "matrix", tuple(map(tuple, M.tolist())))

    @classmethod
    def identity(cls):
        return cls(CovKind.IDENTITY)

    @classmethod
    def ar1(cls, rho):
        return cls(CovKind.AR1, rho=float(rho))

    @classmethod
    def banded(cls, diag, band_values, width=None):
        vals = tuple(np.atleast_1d(band_values).tolist())
        return cls(CovKind.BANDED, diag=float(diag), band_values=vals, width=width or 0)

    @classmethod
    def explicit(cls, matrix):
        return cls(CovKind.EXPLICIT, matrix=matrix)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is CovKind.AR1:
            d["rho"] = self.rho
        elif self.kind is CovKind.BANDED:
            d.update(diag=self.diag, band_values=list(self.band_values), width=self.width)
        elif self.kind is CovKind.EXPLICIT:
            d["matrix"] = [list(r) for r in self.matrix]
        return d

    @classmethod
    def from_dict(cls, d) -> "CovarianceSpec":
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        allowed = {"kind", "rho", "diag", "band_values", "width", "matrix"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "covariance")
        if "kind" not in d:
            raise ConfigError("missing 'kind'", "covariance")
        if "band_values" in d:
            d["band_values"] = tuple(np.atleast_1d(d["band_values"]).tolist())
        return cls(**d)


class Transform(Enum):
    LINEAR = "linear"
    DIRICHLET = "dirichlet"
    SPHERE = "sphere"


class RootKind(Enum):
    CHOLESKY = "cholesky"
    SYMMETRIC = "symmetric"


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelSpec:
    """A data-generating process for one sample.

    ``mean`` is either a scalar (every coordinate equal) or a length-``p``
    vector; coordinates are multiplied by ``p ** mean_p_power`` so that
    dimension-scaled shifts such as ``(2p)^(-1/2)`` survive :meth:`with_dim`.
    ``root`` picks the factor ``Gamma``: Cholesky (fast) or the symmetric
    square root.  For Gaussian entries both give the same distribution.
    """

    p: int
    entry: EntryDist = field(default_factory=EntryDist)
    covariance: CovarianceSpec = field(default_factory=CovarianceSpec)
    mean: float | tuple = 0.0
    mean_p_power: float = 0.0
    transform: Transform = Transform.LINEAR
    root: RootKind = RootKind.CHOLESKY

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p!r}", "p")
        object.__setattr__(self, "p", int(self.p))
        try:
            object.__setattr__(self, "transform", Transform(self.transform))
        except ValueError:
            raise ConfigError(f"unknown transform {self.transform!r}", "transform") from None
        try:
            object.__setattr__(self, "root", RootKind(self.root))
        except ValueError:
            raise ConfigError(f"unknown root {self.root!r}", "root") from None
        if isinstance(self.entry, (str, dict)):
            object.__setattr__(self, "entry", EntryDist.from_dict(self.entry))
        if isinstance(self.covariance, (str, dict)):
            object.__setattr__(self, "covariance", CovarianceSpec.from_dict(self.covariance))
        if np.ndim(self.mean) == 0:
            mean = float(self.mean)
            if not math.isfinite(mean):
                raise ConfigError("mean must be finite", "mean")
        else:
            mean = tuple(float(v) for v in np.asarray(self.mean).ravel())
            if len(mean) != self.p:
                raise ConfigError(f"mean has length {len(mean)}, expected p={self.p}", "mean")
            if not all(math.isfinite(v) for v in mean):
                raise ConfigError("mean must be finite", "mean")
        object.__setattr__(self, "mean", mean)
        if self.covariance.kind is CovKind.EXPLICIT and len(self.covariance.matrix) != self.p:
            raise ConfigError("explicit covariance does not match p", "covariance.matrix")

    def with_dim(self, p: int) -> "ModelSpec":
        """Same model at dimension ``p`` (vector means must be scalar)."""
        if isinstance(self.mean, tuple) and p != self.p:
            raise ConfigError("cannot rescale a model with an explicit mean vector", "mean")
        return replace(self, p=int(p))

    def mean_vector(self) -> np.ndarray:
        scale = float(self.p) ** self.mean_p_power
        if isinstance(self.mean, tuple):
            return np.asarray(self.mean) * scale
        return np.full(self.p, self.mean * scale)

    def to_dict(self) -> dict:
        d = {
            "p": self.p,
            "transform": self.transform.value,
        }
        if self.transform is Transform.LINEAR:
            d["entry"] = self.entry.to_dict()
            d["covariance"] = self.covariance.to_dict()
            d["mean"] = list(self.mean) if isinstance(self.mean, tuple) else self.mean
            if self.mean_p_power:
                d["mean_p_power"] = self.mean_p_power
            d["root"] = self.root.value
        return d

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        if not isinstance(d, dict):
            raise ConfigError("model must be a JSON object", "model")
        d = dict(d)
        allowed = {"p", "entry", "covariance", "mean", "mean_p_power", "transform", "root"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "model")
        if "p" not in d:
            raise ConfigError("missing 'p'", "p")
        if isinstance(d.get("mean"), list):
            d["mean"] = tuple(d["mean"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# covariance and roots


def covariance_matrix(spec: ModelSpec) -> np.ndarray:
    """Covariance of ``Gamma U`` before entry scaling (the structural ``Sigma``).

    Raises
    ------
    NotPositiveSemiDefinite
        If a banded or explicit matrix has an eigenvalue below ``-1e-8``.
    """
    p = spec.p
    cov = spec.covariance
    idx = np.arange(p)
    lag = np.abs(idx[:, None] - idx[None, :])
    if cov.kind is CovKind.IDENTITY:
        return np.eye(p)
    if cov.kind is CovKind.AR1:
        return cov.rho ** lag.astype(np.float64)
    if cov.kind is CovKind.BANDED:
        S = np.where(lag == 0, cov.diag, 0.0)
        for k, v in enumerate(cov.band_values, start=1):
            S = np.where(lag == k, v, S)
    else:
        S = np.array(cov.matrix, dtype=np.float64)
        if not np.allclose(S, S.T, atol=1e-12, rtol=0):
            raise NotPositiveSemiDefinite("explicit covariance is not symmetric")
    if np.linalg.eigvalsh(S)[0] < -PSD_TOL:
        raise NotPositiveSemiDefinite("covariance has a negative eigenvalue")
    return S


def factor_root(Sigma, kind: RootKind = RootKind.CHOLESKY) -> np.ndarray:
    """A factor ``Gamma`` with ``Gamma Gamma^T = Sigma``.

    Cholesky when ``Sigma`` is positive definite and ``kind`` is Cholesky;
    otherwise the symmetric square root from the eigendecomposition (negative
    round-off eigenvalues clipped to 0).
    """
    S = np.asarray(Sigma, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotPositiveSemiDefinite("Sigma must be square")
    if not np.allclose(S, S.T, atol=1e-12, rtol=0):
        raise NotPositiveSemiDefinite("Sigma is not symmetric")
    if RootKind(kind) is RootKind.CHOLESKY:
        try:
            return np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            pass
    w, V = np.linalg.eigh(S)
    if w[0] < -PSD_TOL:
        raise NotPositiveSemiDefinite(f"smallest eigenvalue {w[0]:.3g} is negative")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def model_factor(spec: ModelSpec) -> np.ndarray:
    """The factor ``Gamma`` actually used when sampling ``spec``."""
    if spec.covariance.kind is CovKind.IDENTITY:
        return np.eye(spec.p)
    return factor_root(covariance_matrix(spec), spec.root)


# --------------------------------------------------------------------------
# population moments


@dataclass(frozen=True)
class PopulationMoments:
    """Exact first two moments of a model, plus what the quadratic-form
    variances need: the standardized factor ``Gamma`` (``None`` outside the
    linear transform) and per-entry skewness / excess kurtosis."""

    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray | None
    skewness: float
    excess_kurtosis: float


def population_moments(spec: ModelSpec) -> PopulationMoments:
    p = spec.p
    if spec.transform is Transform.DIRICHLET:
        # p * Dir(1,...,1): mean 1, var (p-1)/(p+1), cov -1/(p+1)
        cov = (p / (p + 1.0)) * np.eye(p) - 1.0 / (p + 1.0)
        return PopulationMoments(np.ones(p), cov, None, math.nan, math.nan)
    if spec.transform is Transform.SPHERE:
        return PopulationMoments(np.zeros(p), np.eye(p), None, math.nan, math.nan)
    m_e, v_e, skew, kurt = spec.entry.moments()
    G = model_factor(spec)
    mean = spec.mean_vector() + m_e * G.sum(axis=1)
    Gs = math.sqrt(v_e) * G
    return PopulationMoments(mean, Gs @ Gs.T, Gs, skew, kurt)


# --------------------------------------------------------------------------
# sampling


class Sampler:
    """Pre-factored sampler for one model; cheap to call repeatedly."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._mu = spec.mean_vector()
        self._identity = spec.covariance.kind is CovKind.IDENTITY
        self._GT = None if self._identity else np.ascontiguousarray(model_factor(spec).T)

    def __call__(self, n: int, rng) -> np.ndarray:
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"n must be a positive integer, got {n!r}", "n")
        spec = self.spec
        p = spec.p
        if not isinstance(rng, np.random.Generator):
            rng = derive_rng(rng)
        if spec.transform is Transform.DIRICHLET:
            E = rng.standard_exponential((n, p))
            return p * E / E.sum(axis=1, keepdims=True)
        if spec.transform is Transform.SPHERE:
            Z = rng.standard_normal((n, p))
            return math.sqrt(p) * Z / np.linalg.norm(Z, axis=1, keepdims=True)
        U = spec.entry.draw(rng, (n, p))
        X = U if self._identity else U @ self._GT
        X += self._mu
        return X


def sample(spec: ModelSpec, n: int, seed=0) -> np.ndarray:
    """Draw ``n`` rows from ``spec``; ``seed`` is an int or a Generator."""
    return Sampler(spec)(n, seed)
