import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdmmd import DomainError
from hdmmd.normal import normal_cdf, normal_quantile, normal_sf


def test_reference_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-6)
    assert normal_quantile(0.95) == pytest.approx(1.6448536269514722, abs=1e-12)


@pytest.mark.parametrize("x", [-30.0, -8.0, -1.3, 0.7, 5.0])
def test_cdf_matches_mpmath(x):
    mpmath.mp.dps = 30
    ref = float(mpmath.ncdf(x))
    assert normal_cdf(x) == pytest.approx(ref, rel=1e-14)
    assert normal_sf(-x) == pytest.approx(ref, rel=1e-14)


@given(st.floats(1e-10, 1 - 1e-10))
@settings(max_examples=300, deadline=None)
def test_quantile_inverts_cdf(q):
    assert abs(normal_cdf(normal_quantile(q)) - q) <= 1e-12


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_quantile_domain(q):
    with pytest.raises(DomainError):
        normal_quantile(q)


def test_array_cdf():
    x = np.array([-1.0, 0.0, 1.0])
    out = normal_cdf(x)
    assert out.shape == (3,)
    assert out[0] + out[2] == pytest.approx(1.0)
