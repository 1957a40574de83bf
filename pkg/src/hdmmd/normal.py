"""Standard normal CDF and quantile.

The CDF goes through ``erfc`` (full relative accuracy in both tails); the
quantile is Wichura's AS241 rational approximation as shipped in
:class:`statistics.NormalDist`, accurate to about 1e-16.
"""

import math
from statistics import NormalDist

import numpy as np
from scipy import special

from .errors import DomainError

_STD = NormalDist()
_SQRT2 = math.sqrt(2.0)


def normal_cdf(x):
    """``Phi(x)``; scalars give floats, arrays give arrays."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / _SQRT2)
    return special.ndtr(np.asarray(x, dtype=np.float64))


def normal_sf(x):
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / _SQRT2)
    return special.ndtr(-np.asarray(x, dtype=np.float64))


def normal_quantile(q):
    """Inverse of :func:`normal_cdf` on ``(0, 1)``."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    return _STD.inv_cdf(q)
