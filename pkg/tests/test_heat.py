import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fraclab.analytic import sample_analytic
from fraclab.grid import GridSpec, frac_lap_fourier
from fraclab.heat import (HeatTrace, PreconditionError, TimeQuadrature, frac_lap_heat, heat_bound_holds,
                          heat_evolve, heat_kernel_value, ibp_identity_residual, mellin_G)
from fraclab.regions import Ball, RegionSpec

# Mellin transform of the free-space heat trace of annulus([0,0], 2, 3) at the
# origin, alpha = 0.4, z = 1: scipy quad in r and log t, computed once and frozen.
MELLIN_ORACLE = 0.34041100069469904


def test_kernel_has_unit_mass():
    for n in (1, 2, 3):
        f = lambda r: heat_kernel_value(0.7, [r] + [0.0] * (n - 1), n) * {1: 2, 2: 2 * np.pi * r, 3: 4 * np.pi * r * r}[n]
        assert abs(integrate.quad(f, 0, np.inf)[0] - 1) <= 1e-10
    with pytest.raises(ValueError):
        heat_kernel_value(0.0, [0.0], 1)


def test_heat_evolve_widens_gaussian():
    g = GridSpec(2, 12.0, 128)
    u = sample_analytic(g, "gaussian([0.0, 0.0], 0.3)")
    got = heat_evolve(u, 0.45)
    ref = sample_analytic(g, "gaussian([0.0, 0.0], 0.75)")
    assert (got - ref).max_abs() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_semigroup_property(t1, t2):
    g = GridSpec(1, 12.0, 256)
    u = sample_analytic(g, "sum(bump([1.0], 2.0), gaussian([-2.0], 0.3))")
    a = heat_evolve(heat_evolve(u, t1), t2)
    b = heat_evolve(u, t1 + t2)
    assert (a - b).max_abs() <= 1e-13 * u.max_abs()


def test_quadrature_calibrates():
    est = TimeQuadrature().calibrate()
    assert est.error <= 1e-10


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_heat_form_matches_fourier_form(s):
    g = GridSpec(2, 12.0, 128)
    u = sample_analytic(g, "sum(gaussian([1.0, -1.0], 0.5), bump([-2.0, 0.0], 2.5))")
    ref = frac_lap_fourier(u, s)
    for x in ([0.0, 0.0], [0.75, 0.375]):
        h = frac_lap_heat(u, s, x)
        assert abs(h.value - ref.at(x)) <= 1e-7 * abs(ref.at(x))


def test_mellin_against_frozen_oracle():
    g = GridSpec(2, 4.0, 256)
    region = RegionSpec((Ball((0.0, 0.0), 1.5),), (Ball((0.0, 0.0), 0.3),), 0.4)
    v = sample_analytic(g, "annulus([0.0, 0.0], 2.0, 3.0)", tol=1)
    G = mellin_G(v, 0.4, 1.0, [0.0, 0.0], region)
    assert abs(G.value - MELLIN_ORACLE) <= 2e-6 * MELLIN_ORACLE


def test_mellin_refuses_left_half_plane():
    g = GridSpec(2, 12.0, 128)
    region = RegionSpec((Ball((0.0, 0.0), 1.0),), (Ball((0.0, 0.0), 0.3),), 0.3)
    v = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    with pytest.raises(ValueError):
        mellin_G(v, 0.4, -0.5, [0.0, 0.0], region)


def test_trace_requires_vanishing_on_O():
    g = GridSpec(2, 12.0, 128)
    region = RegionSpec((Ball((0.0, 0.0), 1.0),), (Ball((0.0, 0.0), 0.3),), 0.3)
    v = sample_analytic(g, "gaussian([0.0, 0.0], 0.5)")
    with pytest.raises(PreconditionError):
        HeatTrace.build(v, [0.0, 0.0], region)


def test_heat_bound_and_ibp():
    g = GridSpec(2, 12.0, 256)
    region = RegionSpec((Ball((0.0, 0.0), 1.0),), (Ball((0.0, 0.0), 0.3),), 0.3)
    v = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    tr = HeatTrace.build(v, [0.0, 0.0], region)
    assert heat_bound_holds(tr, 0.3)
    assert ibp_identity_residual(v, 0.4, 1, [0.0, 0.0], region) <= 1e-10
