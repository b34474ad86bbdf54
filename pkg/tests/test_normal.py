import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from credamp.normal import norm_cdf, norm_ppf


@pytest.mark.parametrize("x", [-38.0, -8.5, -3.0, -1.0, -1e-8, 0.0, 0.5, 1.959963984540054, 6.0])
def test_cdf_matches_scipy(x):
    assert norm_cdf(x) == pytest.approx(stats.norm.cdf(x), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("p", [1e-300, 1e-20, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999, 1 - 1e-12])
def test_ppf_matches_scipy(p):
    assert norm_ppf(p) == pytest.approx(stats.norm.ppf(p), rel=1e-13, abs=1e-15)


def test_ppf_edges():
    assert norm_ppf(0.0) == -math.inf
    assert norm_ppf(1.0) == math.inf
    assert norm_ppf(0.5) == 0.0
    for bad in (-0.1, 1.1, math.nan):
        with pytest.raises(ValueError):
            norm_ppf(bad)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_ppf_inverts_cdf(p):
    assert norm_cdf(norm_ppf(p)) == pytest.approx(p, rel=1e-10)


@given(st.floats(min_value=-30, max_value=30))
def test_cdf_symmetry(x):
    assert norm_cdf(x) + norm_cdf(-x) == pytest.approx(1.0, abs=1e-15)


def test_ppf_monotone():
    p = np.linspace(1e-6, 1 - 1e-6, 2001)
    z = np.array([norm_ppf(v) for v in p])
    assert np.all(np.diff(z) > 0)
