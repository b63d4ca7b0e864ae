import numpy as np
import pytest

from fraclab import fz, pipeline
from fraclab.analytic import sample_analytic
from fraclab.decay import MarginError, fit_super_exp_decay, mollifier_symbol, mollify
from fraclab.exponents import ExponentConfig, HypothesisViolation
from fraclab.grid import Field, GridSpec
from fraclab.heat import PreconditionError
from fraclab.regions import Ball, RegionSpec
from fraclab.spherical import box_certificate

REGION = RegionSpec((Ball((0.0, 0.0), 1.0),), (Ball((0.0, 0.0), 0.3),), 0.3)


def test_decay_fit_certifies_gaussian():
    g = GridSpec(2, 12.0, 128)
    u = sample_analytic(g, "gaussian([0.0, 0.0], 0.5)")
    fit = fit_super_exp_decay(u)
    assert fit.ok and fit.gamma > 1
    r = g.radius()
    # a least-squares envelope: it dominates the samples up to its own fit residual
    assert np.all(np.abs(u.values) <= fit.certificate.bound(r) * (1 + 1e-4) + 1e-300)


def test_exponential_tail_is_not_certified():
    g = GridSpec(1, 30.0, 512)
    u = sample_analytic(g, "expdecay([0.0], 1.0)", tol=1)
    assert not fit_super_exp_decay(u).ok


def test_mollifier_has_unit_mass_and_margin():
    g = GridSpec(2, 12.0, 128)
    assert mollifier_symbol(g, 0.3)[0, 0] == pytest.approx(1.0, abs=1e-12)
    u = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    with pytest.raises(MarginError):
        mollify(u, 0.5, 0.4)


def test_reduction_for_a_sub_unit_exponent_is_mollify_and_scale():
    g = GridSpec(2, 12.0, 256)
    u = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    sc = pipeline.reduce_to_smooth([u], ExponentConfig.of([0.5], [2.0]), REGION, 0.05)
    small = REGION.shrink(0.05).O_mask(g)
    ref = np.where(small, 0, 2.0 * mollify(u, 0.05, 0.35).values)
    assert np.array_equal(sc.fields[0].values, ref)
    assert sc.alphas == [0.5]


def test_reduction_checks_hypothesis_and_vanishing():
    g = GridSpec(2, 12.0, 128)
    u = sample_analytic(g, "shell([0.0, 0.0], 3.5, 0.3)")
    with pytest.raises(HypothesisViolation):
        pipeline.reduce_to_smooth([u, u], ExponentConfig.of([0.3, 1.3]), REGION, 0.05)
    bad = sample_analytic(g, "gaussian([0.0, 0.0], 0.5)")
    with pytest.raises(PreconditionError):
        pipeline.reduce_to_smooth([bad], ExponentConfig.of([0.3]), REGION, 0.05)


def test_pipeline_on_zero_fields():
    g = GridSpec(2, 12.0, 128)
    z = Field(g, np.zeros(g.shape, complex), box_certificate(Field(g, np.zeros(g.shape))))
    sc = fz.FScenario([z, z], [0.3, 0.75], REGION, [0.0, 0.0])
    rep = pipeline.run_pipeline(sc, M_max=3, m_residue=1)
    assert rep.ok and rep.verdicts() == ["ZERO", "ZERO"]
    assert "ZERO" in rep.render()


def test_pipeline_on_shells_reports_nonzero():
    fields, region, x = pipeline._shell_pair(2)
    sc = fz.FScenario(fields, [0.3, 0.75], region, x)
    rep = pipeline.run_pipeline(sc, M_max=2, m_residue=1)
    assert not rep.step1_ok
    assert rep.verdicts() == ["NONZERO", "NONZERO"]


def test_projection_drives_F1_down_with_delta():
    g = GridSpec(1, 12.0, 512)
    region = RegionSpec([Ball((0.0,), 1.0)], [Ball((0.0,), 0.3)], 0.3)
    v = sample_analytic(g, "shell([0.0], 3.5, 0.3)")
    x = g.coords()[0]
    basis = []
    for i in np.flatnonzero(~region.O_mask(g) & (np.abs(x) < 2.0)):
        e = np.zeros(g.shape, complex)
        e[i] = 1
        basis.append(Field(g, e, box_certificate(Field(g, np.abs(e)))))
    f1 = []
    for delta in (1e-5, 1e-6, 1e-7, 1e-8):
        pr = pipeline.constraint_projection(v, 0.3, basis, region, delta)
        sc = fz.FScenario([pr.field], [0.3], region, [0.0])
        f1.append(max(fz.check_F_at_integers(sc, 1, delta=delta).residuals))
    assert all(b < a for a, b in zip(f1, f1[1:]))


def test_separation_hypothesis_is_necessary():
    rep = pipeline.demonstrate_H_necessity(2)
    assert rep.shown
    assert max(rep.mixing_valid) <= 1e-10 and min(rep.mixing_violating) > 0.1
