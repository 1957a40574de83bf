"""Isotropic kernels ``k(x, y) = f(|x - y|^2 / gamma)`` and bandwidth policies.

Four admissible families are provided (Gaussian, Laplace, rational quadratic
and the energy distance ``f(x) = -sqrt(x)``), plus the linear ``f(x) = -x``
used to check the reduction to the classical mean-difference statistic.
Energy and linear are not positive definite; the statistics only need ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (
    ConfigError,
    DegenerateBandwidth,
    DomainError,
    EmptyInput,
    UnsupportedOrder,
)

MAX_ORDER = 4


class Family(Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    RATIONAL_QUADRATIC = "rq"
    ENERGY = "energy"
    LINEAR = "linear"


# Integer codes understood by the compiled core.
_CODES = {
    Family.GAUSSIAN: 0,
    Family.LAPLACE: 1,
    Family.RATIONAL_QUADRATIC: 2,
    Family.ENERGY: 3,
    Family.LINEAR: 4,
}

# Derivative blow-up at x = 0 for order >= 1.
_SINGULAR_AT_ZERO = {Family.LAPLACE, Family.ENERGY}

# Laplace: f^(s)(x) = exp(-u) * poly_s(u) / (2^s u^(2s-1)), u = sqrt(x).
_LAPLACE_POLY = {
    1: (-1.0,),
    2: (1.0, 1.0),
    3: (-3.0, -3.0, -1.0),
    4: (15.0, 15.0, 6.0, 1.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """An isotropic kernel: family, bandwidth ``gamma`` and RQ exponent."""

    family: Family
    bandwidth: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}", "bandwidth")
        if family is Family.RATIONAL_QUADRATIC:
            if self.alpha is None or not self.alpha > 0:
                raise ConfigError("rational quadratic kernel needs alpha > 0", "alpha")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ConfigError(f"alpha only applies to the rq family, not {family.value}", "alpha")
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @classmethod
    def gaussian(cls, bandwidth=1.0):
        return cls(Family.GAUSSIAN, bandwidth)

    @classmethod
    def laplace(cls, bandwidth=1.0):
        return cls(Family.LAPLACE, bandwidth)

    @classmethod
    def rational_quadratic(cls, alpha, bandwidth=1.0):
        return cls(Family.RATIONAL_QUADRATIC, bandwidth, alpha)

    @classmethod
    def energy(cls, bandwidth=1.0):
        return cls(Family.ENERGY, bandwidth)

    @classmethod
    def linear(cls, bandwidth=1.0):
        return cls(Family.LINEAR, bandwidth)

    @property
    def code(self) -> int:
        return _CODES[self.family]

    @property
    def param(self) -> float:
        return self.alpha if self.alpha is not None else 0.0

    @property
    def name(self) -> str:
        if self.family is Family.RATIONAL_QUADRATIC:
            return f"rq:{self.alpha:g}"
        return self.family.value

    def with_bandwidth(self, bandwidth: float) -> "KernelSpec":
        return replace(self, bandwidth=bandwidth)

    def f(self, x):
        return f_deriv(self, 0, x)

    def deriv(self, order, x):
        return f_deriv(self, order, x)

    def __call__(self, sqdist):
        return kernel_value(self, sqdist)


def _scalar_or_array(out, scalar):
    return float(out) if scalar else out


def f_deriv(kernel: KernelSpec, order: int, x):
    """Derivative ``d^s f / dx^s`` of the kernel profile at ``x >= 0``.

    Closed forms per family; ``x`` may be a scalar or an array.

    Raises
    ------
    UnsupportedOrder
        If ``order`` is negative or above 4.
    DomainError
        If ``x < 0``, or ``x == 0`` where the derivative is singular
        (Laplace and energy, ``order >= 1``).
    """
    if not isinstance(order, (int, np.integer)) or order < 0 or order > MAX_ORDER:
        raise UnsupportedOrder(f"derivative order must be in 0..{MAX_ORDER}, got {order}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("kernel profile is defined on [0, inf)")
    fam = kernel.family
    if order >= 1 and fam in _SINGULAR_AT_ZERO and np.any(x == 0):
        raise DomainError(f"{fam.value} derivative of order {order} is singular at 0")

    if fam is Family.GAUSSIAN:
        out = (-1.0) ** order * np.exp(-x)
    elif fam is Family.LAPLACE:
        u = np.sqrt(x)
        if order == 0:
            out = np.exp(-u)
        else:
            coeffs = _LAPLACE_POLY[order]
            poly = sum(c * u**k for k, c in enumerate(coeffs))
            out = np.exp(-u) * poly / (2.0**order * u ** (2 * order - 1))
    elif fam is Family.RATIONAL_QUADRATIC:
        a = kernel.alpha
        rising = math.prod(a + k for k in range(order))
        out = (-1.0) ** order * rising * (1.0 + x) ** (-a - order)
    elif fam is Family.ENERGY:
        # -x^(1/2) differentiated s times: -(1/2)(-1/2)...(1/2 - s + 1) x^(1/2 - s)
        falling = math.prod(0.5 - k for k in range(order))
        out = -falling * x ** (0.5 - order)
    else:
        out = -x if order == 0 else (np.full_like(x, -1.0) if order == 1 else np.zeros_like(x))
    return _scalar_or_array(out, scalar)


def kernel_value(kernel: KernelSpec, sqdist):
    """``f(sqdist / gamma)``."""
    return f_deriv(kernel, 0, np.asarray(sqdist, dtype=np.float64) / kernel.bandwidth)


class BandwidthMode(Enum):
    FIXED = "fixed"
    SCALED = "scaled"
    MEDIAN = "median"


@dataclass(frozen=True)
class BandwidthPolicy:
    """How to pick ``gamma``: fixed value, ``c * p``, or the median heuristic."""

    mode: BandwidthMode
    value: float | None = None

    def __post_init__(self):
        mode = BandwidthMode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is BandwidthMode.MEDIAN:
            object.__setattr__(self, "value", None)
        elif self.value is None or not (self.value > 0 and math.isfinite(self.value)):
            raise ConfigError(f"{mode.value} bandwidth needs a positive value", "bandwidth")

    @classmethod
    def fixed(cls, gamma):
        return cls(BandwidthMode.FIXED, float(gamma))

    @classmethod
    def scaled(cls, c):
        return cls(BandwidthMode.SCALED, float(c))

    @classmethod
    def median(cls):
        return cls(BandwidthMode.MEDIAN)

    @property
    def label(self) -> str:
        if self.mode is BandwidthMode.MEDIAN:
            return "median"
        return f"{self.mode.value}:{self.value:g}"

    def resolve(self, X, Y=None) -> float:
        return resolve_bandwidth(self, X, Y)


def resolve_bandwidth(policy: BandwidthPolicy, X, Y=None) -> float:
    """Bandwidth for the pooled sample.

    ``MEDIAN`` takes the median of squared distances over pooled pairs
    ``i < j``; squared so the value plugs straight into ``f(d^2 / gamma)``.
    ``X`` may also be a bare dimension ``p`` for the non-data modes.
    """
    if policy.mode is BandwidthMode.FIXED:
        return policy.value
    if policy.mode is BandwidthMode.SCALED:
        p = X if isinstance(X, (int, np.integer)) else np.shape(X)[1]
        return policy.value * p
    from ._backend import core, default_threads

    Z = np.asarray(X, dtype=np.float64)
    if Y is not None:
        Z = np.vstack([Z, np.asarray(Y, dtype=np.float64)])
    Z = np.ascontiguousarray(Z)
    N = Z.shape[0]
    if N < 2:
        raise EmptyInput("median heuristic needs at least two pooled rows")
    G = core.gram(Z, None, default_threads())
    sq = np.diagonal(G)
    iu = np.triu_indices(N, k=1)
    d = np.maximum(sq[iu[0]] + sq[iu[1]] - 2.0 * G[iu], 0.0)
    med = float(np.median(d))
    if not med > 0:
        raise DegenerateBandwidth("median pairwise squared distance is zero")
    return med


def parse_kernel(text: str, bandwidth: float = 1.0) -> KernelSpec:
    """Parse ``gaussian | laplace | rq:<alpha> | energy | linear``."""
    text = text.strip().lower()
    name, _, arg = text.partition(":")
    try:
        fam = Family(name)
    except ValueError:
        raise ConfigError(f"unknown kernel {text!r}", "kernel") from None
    if fam is Family.RATIONAL_QUADRATIC:
        try:
            alpha = float(arg)
        except ValueError:
            raise ConfigError("rq kernel needs rq:<alpha>", "kernel") from None
        return KernelSpec(fam, bandwidth, alpha)
    if arg:
        raise ConfigError(f"kernel {name} takes no parameter", "kernel")
    return KernelSpec(fam, bandwidth)


def parse_bandwidth(text: str) -> BandwidthPolicy:
    """Parse ``fixed:<g> | scaled:<c> | median``."""
    text = text.strip().lower()
    mode, _, arg = text.partition(":")
    if mode == "median" and not arg:
        return BandwidthPolicy.median()
    if mode not in ("fixed", "scaled"):
        raise ConfigError(f"unknown bandwidth policy {text!r}", "bandwidth")
    try:
        value = float(arg)
    except ValueError:
        raise ConfigError(f"{mode} bandwidth needs a number, got {arg!r}", "bandwidth") from None
    return BandwidthPolicy(BandwidthMode(mode), value)
