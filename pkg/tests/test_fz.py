import numpy as np
import pytest

from fraclab import fz, pipeline
from fraclab.exponents import (ExponentConfig, ExponentError, HypothesisViolation, validate_alphas,
                               validate_exponents)
from fraclab.heat import TimeQuadrature


@pytest.fixture(scope="module")
def sc2():
    fields, region, x = pipeline._shell_pair(2)
    return fz.FScenario(fields, [0.3, 0.75], region, x)


def test_exponent_config_rules():
    cfg = ExponentConfig.of([1.3, 0.4], [0.5, 1.0])
    assert cfg.s == [0.4, 1.3] and cfg.floors == [0, 1]
    assert np.allclose(cfg.alphas, [0.4, 0.3])
    for bad in ([1.0], [0.5, 0.5], [-0.2]):
        with pytest.raises(ExponentError):
            ExponentConfig.of(bad)


def test_separation_hypothesis():
    assert validate_exponents(ExponentConfig.of([0.3, 0.75]), 2).ok
    assert not validate_exponents(ExponentConfig.of([0.3, 1.3]), 2).ok
    assert validate_exponents(ExponentConfig.of([0.3, 0.8]), 2).ok
    assert not validate_exponents(ExponentConfig.of([0.3, 0.8]), 3).ok
    assert not validate_alphas([0.3, 0.3], 2).ok


def test_coincident_exponents_need_override(sc2):
    with pytest.raises(HypothesisViolation):
        fz.FScenario(sc2.fields, [0.3, 0.3], sc2.region, sc2.x)
    fz.FScenario(sc2.fields, [0.3, 0.3], sc2.region, sc2.x, override=True)


def test_right_and_meromorphic_forms_agree(sc2):
    quad = TimeQuadrature()
    for z in (0.25, 1.0, 2 + 1j, 0.5 - 3j):
        r = fz.F_right(z, sc2, quad).value
        m = fz.F_mero(z, sc2)
        assert abs(r - m) <= 1e-8 * abs(m)


def test_pole_list_even_dimension():
    poles = fz.poles_of([0.3, 0.75], 2, n=2)
    locs = sorted((p.location.real for p in poles), reverse=True)
    # in even n the two Gamma families share poles, which become double
    assert np.isclose(locs[0], -1.3) and all(p.order == 2 for p in poles if p.family == "AB")
    assert not any(p.coincident for p in poles)
    merged = fz.poles_of([0.3, 0.3], 1, n=2)
    assert all(p.coincident for p in merged)


def test_pole_list_odd_dimension():
    poles = fz.poles_of([0.3], 2, n=3)
    assert all(p.order == 1 for p in poles)
    assert any(np.isclose(p.location.real, -1.8) for p in poles)


@pytest.mark.parametrize("dim", [2, 3])
def test_residues_match_direct_moments(dim):
    fields, region, x = pipeline._shell_pair(dim)
    sc = fz.FScenario(fields, [0.3, 0.75], region, x)
    for m in (0, 1):
        r = fz.residue_moment(sc, 0, m)
        d = fz.moment_direct(sc.fields[0], sc.x, r.power, sc.region).value
        assert abs(r.moment - d) <= 1e-8 * abs(d)


def test_prefactor_limit():
    for m in (0, 1, 3):
        est, exact = fz.gamma_product_limit(2, 0.45, m)
        assert abs(est - exact) <= 1e-10 * abs(exact)


def test_mero_refuses_pole(sc2):
    with pytest.raises(fz.PoleProximityError):
        fz.F_mero(-1.3, sc2)


def test_integer_table_nonzero_for_shells(sc2):
    tab = fz.check_F_at_integers(sc2, 2, delta=1e-8)
    assert not tab.passed


def test_growth_diagnostics_stay_inside_envelopes(sc2):
    rep = fz.pila_growth_diagnostics(sc2, samples=3)
    assert rep["imag_axis_rate"] < rep["imag_axis_envelope"]
    assert rep["real_axis_rate"] < rep["real_axis_envelope"]
    assert np.isfinite(rep["order_rate"])
