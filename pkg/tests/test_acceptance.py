"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from fraclab import calderon as cal
from fraclab import fz, pipeline, spherical
from fraclab.analytic import sample_analytic
from fraclab.exponents import ExponentConfig
from fraclab.gammafn import log_gamma
from fraclab.grid import Field, GridSpec, frac_lap_fourier
from fraclab.heat import TimeQuadrature, frac_lap_heat, heat_evolve, ibp_identity_residual
from fraclab.regions import Ball, Box, RegionSpec

RESULTS = {}


def record(n: int, ok: bool, detail: str):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


BATTERY = [
    (GridSpec(1, 12.0, 256), "gaussian([0.0], 0.5)", [[0.0], [0.75]]),
    (GridSpec(1, 12.0, 256), "bump([0.5], 2.0)", [[0.0], [0.75]]),
    (GridSpec(2, 12.0, 256), "gaussian([0.0, 0.0], 0.7)", [[0.0, 0.0], [0.75, -0.375]]),
    (GridSpec(2, 12.0, 128), "bump([1.0, 0.0], 3.0)", [[0.0, 0.0], [0.75, 0.375]]),
    (GridSpec(2, 12.0, 256), "sum(gaussian([1.0, -1.0], 0.5), bump([-2.0, 0.0], 2.5))", [[0.0, 0.0], [-0.75, 0.75]]),
]
ORDERS = [0.1, 0.25, 0.5, 0.75, 0.9]


def criterion_1():
    t0 = time.time()
    worst = 0.0
    for grid, spec, pts in BATTERY:
        u = sample_analytic(grid, spec)
        for s in ORDERS:
            ref = frac_lap_fourier(u, s)
            for x in pts:
                h = frac_lap_heat(u, s, x).value
                f = ref.at(x)
                worst = max(worst, abs(h - f) / abs(f))
    dt = time.time() - t0
    return record(1, worst <= 1e-5 and dt <= 60,
                  f"heat-semigroup vs Fourier (-Delta)^s: max rel err {worst:.2e} (<= 1e-5), {dt:.1f} s (<= 60 s)")


def criterion_2():
    worst_heat, worst_comp = 0.0, 0.0
    for grid, spec, _ in BATTERY:
        u = sample_analytic(grid, spec)
        for t1, t2 in [(0.1, 0.3), (0.5, 1.0), (2.0, 0.25)]:
            a = heat_evolve(heat_evolve(u, t1), t2)
            b = heat_evolve(u, t1 + t2)
            worst_heat = max(worst_heat, (a - b).max_abs() / b.max_abs())
        for s, t in [(0.25, 0.5), (0.3, 0.9), (0.75, 1.2)]:
            a = frac_lap_fourier(frac_lap_fourier(u, s), t)
            b = frac_lap_fourier(u, s + t)
            worst_comp = max(worst_comp, (a - b).max_abs() / b.max_abs())
    worst = max(worst_heat, worst_comp)
    return record(2, worst <= 1e-10,
                  f"semigroup {worst_heat:.2e}, fractional composition {worst_comp:.2e} (<= 1e-10)")


def two_term_scenario(dim=2):
    fields, region, x = pipeline._shell_pair(dim)
    return fz.FScenario(fields, [0.3, 0.75], region, x)


Z_POINTS = [0, 0.5, 1, 2, 3.5, 0.5j, -1.5j, 1 + 1j, 2 - 0.5j, 4 + 3j, 0.25 + 6j, 6]


def criterion_3():
    sc = two_term_scenario()
    quad = TimeQuadrature()
    worst = 0.0
    for z in Z_POINTS:
        r = fz.F_right(z, sc, quad).value
        m = fz.F_mero(z, sc)
        worst = max(worst, abs(r - m) / abs(m))
    zs = np.array([0.3, 2.5, 7.25, 0.1 + 3j, -2.7 + 0.4j, -0.45 - 5j, 12 + 1j, -6.3])
    rec = np.abs(np.exp(log_gamma(zs + 1) - log_gamma(zs)) / zs - 1)
    res = float(rec.max())
    return record(3, worst <= 1e-4 and res <= 1e-13,
                  f"F_right vs F_mero at 12 points: {worst:.2e} (<= 1e-4); Gamma recursion {res:.1e} (<= 1e-13)")


def criterion_4():
    grid = GridSpec(2, 12.0, 256)
    region = RegionSpec([Ball((0.0, 0.0), 1.0)], [Ball((0.0, 0.0), 0.3)], 0.3)
    v = sample_analytic(grid, "shell([0.0, 0.0], 3.5, 0.3)")
    res = [ibp_identity_residual(v, 0.4, m, [0.0, 0.0], region) for m in (1, 2, 3)]
    return record(4, max(res) <= 1e-5,
                  "integration by parts m=1,2,3: " + ", ".join(f"{r:.1e}" for r in res) + " (<= 1e-5)")


def criterion_5():
    worst = 0.0
    for dim in (2, 3):
        sc = two_term_scenario(dim)
        for k in (0, 1):
            for m in (0, 1, 2):
                r = fz.residue_moment(sc, k, m)
                d = fz.moment_direct(sc.fields[k], sc.x, r.power, sc.region).value
                worst = max(worst, abs(r.moment - d) / abs(d))
    pref = 0.0
    for dim in (2, 4):
        for m in (0, 1, 2):
            est, exact = fz.gamma_product_limit(dim, 0.3, m)
            pref = max(pref, abs(est - exact) / abs(exact))
    return record(5, worst <= 1e-4 and pref <= 1e-10,
                  f"residue vs direct moments (n=2,3; m=0,1,2): {worst:.1e} (<= 1e-4); "
                  f"double-pole prefactor {pref:.1e} (<= 1e-10)")


def criterion_6():
    rep = pipeline.demonstrate_H_necessity(2)
    sep = max(rep.rescale_valid)
    mix = min(min(rep.rescale_violating), min(rep.mixing_violating))
    return record(6, sep <= 1e-4 and mix > 1e-3,
                  f"rescaling the other term by 10: separated change {sep:.1e} (<= 1e-4); "
                  f"coincident exponents: min(change, mixing) {mix:.2f} (> 1e-3)")


def _profile_basis(dt, tmax):
    return [spherical.profile_from_function(lambda t, a=a: np.exp(-(t - a) ** 2 / 0.5), tmax, dt)
            for a in (2.0, 3.0, 4.0, 5.0)]


def _support_fixtures():
    grid = GridSpec(1, 12.0, 256)
    region = RegionSpec([Ball((0.0,), 1.5)], [Ball((0.0,), 1.0)], 0.25)
    samples = np.array([[-0.75], [0.0], [0.75]])
    ann = sample_analytic(grid, "sum(bump([-4.0], 1.0), bump([4.0], 1.0))")
    off = sample_analytic(grid, "gaussian([4.0], 0.04)")
    zero = Field(grid, np.zeros(grid.shape, complex), ann.decay)
    odd2 = spherical.odd_reflection_fixture(off, [-0.75, 0.75], 1500)
    odd1 = spherical.odd_reflection_fixture(off, [0.0], 1)
    even_cancel = ann - spherical.reflect(ann, 0.0)
    cases = [("zero", zero, True), ("annulus", ann, False), ("offset bump", off, False),
             ("odd reflection", odd2, True), ("single reflection", odd1, False),
             ("annulus minus mirror", even_cancel, True)]
    return grid, region, samples, cases


def criterion_7():
    dt, tmax = 0.05, 12.0
    basis = _profile_basis(dt, tmax)
    rng = np.random.default_rng(7)
    M = 4
    A = np.array([[b.moment(2 * m) for b in basis] for m in range(M + 1)])
    worst = 0.0
    for _ in range(5):
        c0 = rng.standard_normal(len(basis))
        f0 = spherical.RadialProfile(np.zeros(1), basis[0].t, sum(ci * b.h for ci, b in zip(c0, basis)), 1)
        eta = 1e-9 * rng.standard_normal(M + 1)
        c = c0 - np.linalg.lstsq(A, A @ c0 - eta, rcond=None)[0]
        f = spherical.RadialProfile(np.zeros(1), basis[0].t, sum(ci * b.h for ci, b in zip(c, basis)), 1)
        assert np.max(np.abs([f.moment(2 * m) for m in range(M + 1)])) <= 1e-8
        cert = spherical.certify_norm(f, basis, M)
        worst = max(worst, cert.bound / f0.l2_norm())
    grid, region, samples, cases = _support_fixtures()
    wrong = [name for name, v, want in cases
             if spherical.support_decision(v, region, samples).zero != want]
    return record(7, worst <= 1e-5 and not wrong,
                  f"moment-certified norm {worst:.1e} x scale (<= 1e-5); support verdicts "
                  f"{len(cases) - len(wrong)}/{len(cases)} correct" + (f" (wrong: {wrong})" if wrong else ""))


def ip2_1d(q=0.0):
    g = GridSpec(1, 4.0, 256)
    cfg = ExponentConfig.of([0.4, 1.3], [1.0, 0.5])
    W = [Box((1.5,), (2.5,))]
    return cal.ExteriorProblem(g, [Box((-1.0,), (1.0,))], W, W, cfg, q)


def ip2_2d(q=0.0):
    g = GridSpec(2, 4.0, 64)
    cfg = ExponentConfig.of([0.4, 1.3], [1.0, 0.5])
    W = [Box((1.5, -1.0), (2.5, 1.0))]
    return cal.ExteriorProblem(g, [Box((-1.0, -1.0), (1.0, 1.0))], W, W, cfg, q)


def criterion_8():
    worst_sym, worst_id = 0.0, 0.0
    for make in (ip2_1d, ip2_2d):
        geo = make()
        coords = geo.grid.coords()
        q1 = 1 + 0.5 * np.cos(coords[0]) + (0.3 * coords[-1] if geo.grid.dim > 1 else 0)
        q2 = 2 + np.exp(-coords[0] ** 2)
        p1, p2 = geo.with_q(q1), geo.with_q(q2)
        src = cal.gaussian_dictionary(geo, 4)
        for i in range(len(src)):
            for j in range(i + 1, len(src)):
                a = cal.dn_pairing(p1, src[i], src[j])
                b = cal.dn_pairing(p1, src[j], src[i])
                worst_sym = max(worst_sym, abs(a - b) / max(abs(a), abs(b)))
                worst_id = max(worst_id, cal.integral_identity_check(p1, p2, src[i], src[j]).residual)
    return record(8, worst_sym <= 1e-7 and worst_id <= 1e-7,
                  f"DN symmetry {worst_sym:.1e}, integral identity {worst_id:.1e} (1-D and 2-D, <= 1e-7)")


def criterion_9():
    geo = ip2_1d()
    errs = [cal.runge_approximate(geo, 1.0, k).error for k in (8, 16, 32)]
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    return record(9, ok, "Runge error for g = 1, dictionaries 8/16/32: " + ", ".join(f"{e:.4f}" for e in errs))


def criterion_10():
    t0 = time.time()
    geo = ip2_1d()
    x = geo.grid.coords()[0]
    q = 1 + np.sin(np.pi * x)
    src = cal.gaussian_dictionary(geo, 16)
    rec = cal.gaussian_dictionary(geo, 16, where="w2")
    data = cal.dn_matrix(geo.with_q(q), src, rec)
    R = cal.reconstruct_q(data, geo)
    qt = q[geo.omega_mask]
    err = float(np.linalg.norm(R.q - qt) / np.linalg.norm(qt))
    dt = time.time() - t0
    return record(10, err <= 0.1 and dt <= 300,
                  f"blind reconstruction of 1 + sin(pi x): rel L2 error {err:.2e} (<= 0.1), {dt:.1f} s (<= 300 s)")


def criterion_11():
    g = GridSpec(2, 12.0, 256)
    lam = [8.0, 16.0, 32.0]
    d1 = cal.aniso_symbol_extract(np.diag([2.0, 3.0]), [0.0, 0.0], [1.0, 0.0], lam, g)["estimate"]
    d2 = cal.aniso_symbol_extract(np.diag([2.0, 3.0]), [0.0, 0.0], [0.0, 1.0], lam, g)["estimate"]
    diag = max(abs(d1 - 2) / 2, abs(d2 - 3) / 3)
    th = 0.6
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    A = R @ np.diag([2.0, 3.0]) @ R.T
    P = cal.polarize(A, [0.0, 0.0], lam, g).real
    off = abs(P[0, 1] - A[0, 1]) / abs(A[0, 1])
    return record(11, diag <= 0.02 and off <= 0.05,
                  f"diagonal entries {diag:.1e} (<= 2%), polarized off-diagonal {off:.1e} (<= 5%)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("n", range(1, 12))
def test_criterion(n):
    assert CRITERIA[n - 1](), RESULTS.get(n)


if __name__ == "__main__":
    for fn in CRITERIA:
        try:
            fn()
        except Exception as exc:  # report and keep going
            print(f"criterion: FAIL  {fn.__name__} raised {exc!r}")
