import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import calderon as cal
from fraclab.exponents import ExponentConfig
from fraclab.grid import GridSpec
from fraclab.regions import Box

CFG = ExponentConfig.of([0.4, 1.3], [1.0, 0.5])
W = [Box((1.5,), (2.5,))]


def geo(q=0.0, grid=None):
    g = grid or GridSpec(1, 4.0, 256)
    return cal.ExteriorProblem(g, [Box((-1.0,), (1.0,))], W, W, CFG, q)


def values(f):
    return np.asarray(getattr(f, "values", f), complex)


@pytest.fixture(scope="module")
def base():
    return geo()


@pytest.fixture(scope="module")
def sources(base):
    return [values(f) for f in cal.gaussian_dictionary(base, 6)]


def test_geometry_checks():
    with pytest.raises(cal.CoercivityError):
        cal.ExteriorProblem(GridSpec(1, 4.0, 256), [Box((-1.0,), (1.0,))], W, W, ExponentConfig.of([0.4], [-1.0]))
    with pytest.raises(ValueError):
        cal.ExteriorProblem(GridSpec(1, 4.0, 256), [Box((-1.0,), (1.0,))], [Box((0.5,), (2.0,))], W, CFG)


def test_form_is_symmetric_and_shifts_with_q(base):
    f0 = cal.assemble_form(base)
    f1 = cal.assemble_form(base.with_q(2.0))
    assert f0.hermitian_residual() <= 1e-14
    assert f1.min_rayleigh() == pytest.approx(f0.min_rayleigh() + 2.0, rel=1e-12)
    assert f0.min_rayleigh() > 0


def test_manufactured_solution(base, sources):
    # choose the interior part v, then pick q so that P_q (f + v) = 0 on Omega
    f = sources[0]
    x = base.grid.coords()[0]
    u = f.copy()
    u[base.omega_mask] = 1.0 + 0.2 * np.cos(3 * x[base.omega_mask])
    q = np.zeros(base.grid.shape, complex)
    q[base.omega_mask] = -base.apply_free(u)[base.omega_mask] / u[base.omega_mask]
    sol = cal.solve_exterior(base.with_q(q), f)
    assert np.max(np.abs(sol.u.values - u)) <= 1e-9
    assert sol.residual <= cal.SOLVER_RTOL


def test_datum_must_vanish_on_omega(base):
    with pytest.raises(ValueError):
        cal.solve_exterior(base, np.ones(base.grid.shape))


def test_dn_map_symmetry_and_identity(base, sources):
    p1, p2 = base.with_q(1.0), base.with_q(3.0)
    a = cal.dn_pairing(p1, sources[1], sources[4])
    b = cal.dn_pairing(p1, sources[4], sources[1])
    assert abs(a - b) <= 1e-12 * abs(a)
    assert cal.integral_identity_check(p1, p2, sources[1], sources[4]).residual <= 1e-7


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_pairing_is_bilinear(a, b):
    p = geo(1.0)
    src = [values(f) for f in cal.gaussian_dictionary(p, 3)]
    lhs = cal.dn_pairing(p, a * src[0] + b * src[1], src[2])
    rhs = a * cal.dn_pairing(p, src[0], src[2]) + b * cal.dn_pairing(p, src[1], src[2])
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


def test_runge_improves_with_dictionary(base):
    errs = [cal.runge_approximate(base, 1.0, k).relative_error for k in (4, 8, 16, 32)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_near_singular_operator_is_refused(base):
    # a large negative constant potential pushes an eigenvalue of the
    # interior operator through zero
    A = base.matrix()
    lam = np.linalg.eigvalsh(A.real)
    with pytest.raises(cal.EigenvalueConditionError):
        base.with_q(-lam[0]).factor()


@pytest.mark.parametrize("expr", ["zero", "cos"])
def test_reconstruction(base, expr):
    x = base.grid.coords()[0]
    q = np.zeros_like(x) if expr == "zero" else 1 + 0.5 * np.cos(np.pi * x)
    src = cal.gaussian_dictionary(base, 16)
    rec = cal.gaussian_dictionary(base, 16, where="w2")
    R = cal.reconstruct_q(cal.dn_matrix(base.with_q(q), src, rec), base)
    qt = q[base.omega_mask]
    err = np.linalg.norm(R.q - qt) / max(np.linalg.norm(qt), 1.0)
    assert err <= 0.05


def test_symbol_extraction():
    g = GridSpec(2, 12.0, 256)
    lam = [8.0, 16.0, 32.0]
    d = cal.aniso_symbol_extract(np.eye(2) * [[2.0], [3.0]], [0.0, 0.0], [2 ** -0.5, 2 ** -0.5], lam, g)
    assert abs(d["estimate"] - 2.5) <= 1e-10
    # a variable coefficient field sampled on the grid
    c = g.coords()
    a = 1.5 + 0.5 * np.exp(-((c[0] - 0.5) ** 2 + c[1] ** 2))
    A = np.zeros((2, 2) + g.shape)
    A[0, 0] = A[1, 1] = a
    est = cal.aniso_symbol_extract(A, [0.0, 0.0], [1.0, 0.0], lam, g)["estimate"]
    assert abs(est - (1.5 + 0.5 * np.exp(-0.25))) <= 0.02 * 2
    with pytest.raises(cal.NyquistError) as info:
        cal.aniso_symbol_extract(np.eye(2), [0.0, 0.0], [1.0, 0.0], [64.0], g)
    assert info.value.max_lambda == pytest.approx(np.pi / g.spacing)
