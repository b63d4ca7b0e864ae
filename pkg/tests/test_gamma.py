import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from fraclab.gammafn import gamma_ratio, gamma_residue, log_gamma, rgamma

zs = st.complex_numbers(min_magnitude=0.05, max_magnitude=40, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(zs)
def test_log_gamma_matches_scipy(z):
    if z.imag == 0 and z.real <= 0 and abs(z.real - round(z.real)) < 1e-3:
        return
    ours = log_gamma(z)
    ref = special.loggamma(z)
    # compare Gamma itself: branches of log may differ by 2 pi i
    d = ours - ref
    assert abs(d.real) <= 1e-12 * max(1, abs(ref.real))
    assert abs((d.imag + np.pi) % (2 * np.pi) - np.pi) <= 1e-12 * max(1, abs(ref))


@settings(max_examples=200, deadline=None)
@given(zs)
def test_recursion(z):
    if abs(z.imag) < 1e-3 and z.real < 0.5:
        return
    ratio = np.exp(log_gamma(z + 1) - log_gamma(z)) / z
    assert abs(ratio - 1) <= 1e-13


def test_residues_and_reciprocal():
    for ell in range(6):
        assert gamma_residue(ell) == (-1) ** ell / math.factorial(ell)
        assert rgamma(-ell) == 0
        eps = 1e-7
        assert abs(eps / rgamma(-ell + eps) - gamma_residue(ell)) <= 1e-5 * abs(gamma_residue(ell))
    with pytest.raises(ValueError):
        gamma_residue(-1)


@pytest.mark.parametrize("m,alpha", [(0, 0.3), (1, 0.3), (4, 0.75), (6, 0.1)])
def test_gamma_ratio(m, alpha):
    assert math.isclose(gamma_ratio(m, alpha), math.gamma(m + 1 + alpha) / math.gamma(1 + alpha), rel_tol=1e-14)
