import math

import numpy as np
import pytest
from scipy import special

from fraclab.analytic import sample_analytic
from fraclab.grid import GridSpec
from fraclab.regions import Ball, RegionSpec
from fraclab.spherical import (SphereError, StripError, build_profile, even_derivative_residuals, even_part_norm,
                               fourier_laplace, odd_reflection_fixture, profile_from_function, reflect,
                               sphere_area, sphere_rule, spherical_mean, support_decision)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_rule_weights_sum_to_area(n):
    pts, w = sphere_rule(n)
    assert math.isclose(w.sum(), sphere_area(n), rel_tol=1e-13)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1)


def test_circle_mean_of_gaussian_matches_bessel():
    g = GridSpec(2, 12.0, 256)
    a = 0.5
    u = sample_analytic(g, f"gaussian([0.0, 0.0], {a})")
    x = np.array([0.375, -0.25])
    r = np.linalg.norm(x)
    for t in (0.3, 1.0, 2.5):
        # int over the unit circle of exp(-|x - t theta|^2 / 4a) / (4 pi a)
        ref = 2 * np.pi / (4 * np.pi * a) * np.exp(-((r - t) ** 2) / (4 * a)) * special.i0e(r * t / (2 * a))
        assert abs(spherical_mean(u, x, t) - ref) <= 1e-12


def test_sphere_leaving_box_is_refused():
    g = GridSpec(2, 4.0, 64)
    u = sample_analytic(g, "gaussian([0.0, 0.0], 0.1)")
    with pytest.raises(SphereError):
        spherical_mean(u, [3.0, 0.0], 1.5)


def test_profile_parseval_and_moments():
    p = profile_from_function(lambda t: t * np.exp(-(t - 3) ** 2), 12.0, 0.02)
    assert abs(even_part_norm(p) - p.l2_norm()) <= 1e-6 * p.l2_norm()
    for row in even_derivative_residuals(p, 3):
        assert abs(row.value - row.from_transform) <= 1e-8 * abs(row.value)
    with pytest.raises(StripError):
        fourier_laplace(p, [10j])


def test_profile_margin_is_checked():
    g = GridSpec(2, 12.0, 256)
    region = RegionSpec((Ball((0.0, 0.0), 1.0),), (Ball((0.0, 0.0), 0.3),), 0.3)
    v = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    p = build_profile(v, [0.0, 0.0], region)
    assert p.t[-1] == pytest.approx(12.0)
    near = sample_analytic(g, "gaussian([0.0, 0.0], 0.5)")
    with pytest.raises(SphereError):
        build_profile(near, [0.0, 0.0], region)


@pytest.fixture(scope="module")
def line():
    g = GridSpec(1, 12.0, 256)
    region = RegionSpec([Ball((0.0,), 1.5)], [Ball((0.0,), 1.0)], 0.25)
    return g, region, np.array([[-0.75], [0.0], [0.75]])


def test_reflection_is_an_involution(line):
    g, _, _ = line
    u = sample_analytic(g, "gaussian([4.0], 0.04)")
    back = reflect(reflect(u, 0.75), 0.75)
    inner = np.abs(g.coords()[0]) < 10
    assert np.array_equal(back.values[inner], u.values[inner])


def test_single_reflection_hides_only_its_center(line):
    g, region, _ = line
    u = sample_analytic(g, "gaussian([4.0], 0.04)")
    odd = odd_reflection_fixture(u, [0.0], 1)
    assert support_decision(odd, region, [[0.0]]).zero
    v = support_decision(odd, region, [[0.75]])
    assert not v.zero and v.witness is not None


def test_two_centers_force_zero(line):
    g, region, samples = line
    u = sample_analytic(g, "gaussian([4.0], 0.04)")
    odd = odd_reflection_fixture(u, [-0.75, 0.75], 1500)
    assert odd.max_abs() <= 1e-13 * u.max_abs()
    assert support_decision(odd, region, samples).label == "ZERO"


def test_sample_outside_omega(line):
    g, region, _ = line
    u = sample_analytic(g, "gaussian([4.0], 0.04)")
    with pytest.raises(SphereError):
        support_decision(u, region, [[1.5]])
