"""Mollifier reduction and the three-step check (integers, moments, spherical means)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .decay import MarginError, fit_super_exp_decay, mollify
from .exponents import ExponentConfig, HypothesisViolation, validate_exponents
from .fz import (FScenario, IntegerTable, LadderError, PoleProximityError, check_F_at_integers,
                 circle_ladder, constraint_points, constraint_residual, mero_term, moment_direct, offsupport_frac_lap,
                 residue_moment, residue_pole, _safe_radii)
from .grid import Field, GridSpec, _apply_symbol
from .heat import PreconditionError
from .regions import Ball, RegionSpec
from .spherical import Verdict, box_certificate, support_decision

MOMENT_RTOL = 1e-4
MOMENT_ATOL = 1e-14
RECERT_NOISE = 1e-10
STEP1_RTOL = 1e-8  # claimed constraint level, relative to sum_k ||v_k||_1


def default_omega_samples(region: RegionSpec, grid: GridSpec, arm: Optional[float] = None) -> np.ndarray:
    """Five nodes on a small cross centred in the first omega shape."""
    c = np.asarray(region.omega[0].center, float)
    c = grid.axis()[np.argmin(np.abs(grid.axis()[:, None] - c[None, :]), axis=0)]
    arm = grid.spacing if arm is None else arm
    pts = [c]
    for d in range(min(grid.dim, 2)):
        for sgn in (1, -1):
            p = c.copy()
            p[d] += sgn * arm
            pts.append(p)
    pts = np.array(pts)
    return pts[region.in_omega(pts)]


def reduce_to_smooth(raw: Sequence[Field], cfg: ExponentConfig, region: RegionSpec, eps: float,
                     x=None, override: bool = False, eps0: Optional[float] = None,
                     vanish_tol: float = 1e-10) -> FScenario:
    """``v_k = b_k (-Delta)^{floor(s_k)} (u_k * psi_eps)`` over the set ``O`` shrunk by ``eps``.

    ``eps0`` defaults to the room left once ``omega`` keeps its ``2 kappa``
    distance from the complement of the shrunken set.
    """
    if len(raw) != len(cfg.terms):
        raise ValueError("need one field per exponent")
    grid = raw[0].grid
    report = validate_exponents(cfg, grid.dim)
    if not report.ok and not override:
        raise HypothesisViolation(report)
    if eps0 is None:
        eps0 = region.margin(grid) - 2 * region.kappa
    if eps0 <= 0:
        raise MarginError("omega leaves no room for mollification")
    small = region.shrink(eps)
    mask = region.O_mask(grid)
    fields = []
    for u, (s, b), fl in zip(raw, cfg.terms, cfg.floors):
        peak = u.max_abs()
        if peak > 0 and np.max(np.abs(u.values[mask]), initial=0) > vanish_tol * peak:
            raise PreconditionError("input field does not vanish on O")
        v = mollify(u, eps, eps0) * b
        if fl:
            dec = v.decay
            v = _apply_symbol(v, v.grid.xi_squared() ** fl, decay=None)
            v = v.with_values(np.where(small.O_mask(grid), 0, v.values), decay=_recertify(v, dec))
        else:
            v = v.with_values(np.where(small.O_mask(grid), 0, v.values))
        fields.append(v)
    if x is None:
        x = default_omega_samples(region, grid)[0]
    return FScenario(fields, list(cfg.alphas), small, x, override=override, vanish_tol=vanish_tol)


def _recertify(v: Field, before):
    if before is not None and before.zero_tail:
        return before
    fit = fit_super_exp_decay(v)
    if not fit.ok:
        # spectral derivatives lift roundoff ringing in the far field
        fit = fit_super_exp_decay(v, noise=RECERT_NOISE)
    return fit.certificate if fit.ok else None


# --------------------------------------------------------------------------


@dataclass
class MomentCheck:
    term: int
    x: tuple
    m: int
    power: int
    residue: complex
    direct: complex
    tol: float
    mixed: bool = False
    error: str = ""

    @property
    def residual(self) -> float:
        return abs(self.residue - self.direct)

    @property
    def passed(self) -> bool:
        return not self.error and not self.mixed and self.residual <= self.tol


@dataclass
class PipelineReport:
    step1: IntegerTable
    step2: List[MomentCheck]
    step3: List[Verdict]
    margins: dict
    hypothesis_flags: List[str]
    notes: List[str] = field(default_factory=list)

    @property
    def step1_ok(self) -> bool:
        return self.step1.passed

    @property
    def step2_ok(self) -> bool:
        return all(c.passed for c in self.step2)

    def verdicts(self) -> List[str]:
        up = self.step1_ok and self.step2_ok
        return ["ZERO" if (up and v.zero) else "NONZERO" for v in self.step3]

    @property
    def ok(self) -> bool:
        return self.step1_ok and self.step2_ok

    def render(self) -> str:
        lines = [
            f"step I   (F at integers): {'pass' if self.step1_ok else 'FAIL'}  "
            f"max |F(m)| = {max(self.step1.residuals, default=0):.3e}, delta = {self.step1.delta:.3e}",
            f"step II  (moments):       {'pass' if self.step2_ok else 'FAIL'}  "
            f"{sum(c.passed for c in self.step2)}/{len(self.step2)} checks",
        ]
        for k, (v, lab) in enumerate(zip(self.step3, self.verdicts())):
            lines.append(f"step III (term {k}):        {lab}  max |SM| = {v.max_mean:.3e}, threshold {v.threshold:.3e}")
        for h in self.hypothesis_flags:
            lines.append(f"hypothesis: {h}")
        lines.extend(f"note: {n}" for n in self.notes)
        lines.append("thresholds are engineering choices; the table is evidence, not a proof")
        return "\n".join(lines)


def run_pipeline(sc: FScenario, M_max: int = 6, omega_samples=None, m_residue: int = 4,
                 delta: Optional[float] = None, support_delta: float = 1e-12) -> PipelineReport:
    """Step I: ``F(m)`` for ``m <= M_max``; Step II: residue moments against direct
    quadrature at each sample; Step III: spherical-mean support decision per term.

    ``delta`` is the level to which the constraint is claimed to hold on O
    (default ``STEP1_RTOL * sum_k ||v_k||_1``); Step I passes when every
    ``|F(m)|`` is within the heuristic Cauchy bound times ``delta``.
    """
    grid = sc.grid
    if delta is None:
        delta = STEP1_RTOL * sum(v.l1_norm() for v in sc.fields)
    if omega_samples is None:
        omega_samples = default_omega_samples(sc.region, grid)
    omega_samples = np.atleast_2d(np.asarray(omega_samples, float))
    flags = [] if sc.hypothesis.ok else sc.hypothesis.lines()
    notes = []
    step1 = check_F_at_integers(sc, M_max, delta)
    step2 = []
    for x in omega_samples:
        sx = sc.at(x)
        for k, v in enumerate(sx.fields):
            for m in range(m_residue + 1):
                _, _, power = residue_pole(grid.dim, sx.alphas[k], m)
                try:
                    direct = moment_direct(v, x, power, sx.region).value
                except PreconditionError as exc:
                    step2.append(MomentCheck(k, tuple(x), m, power, 0j, 0j, 0.0, error=str(exc)))
                    continue
                try:
                    r = residue_moment(sx, k, m)
                    res, mixed, err = r.moment, r.mixed, ""
                except (LadderError, PoleProximityError) as exc:
                    res, mixed, err = 0j, False, str(exc)
                tol = MOMENT_RTOL * abs(direct) + MOMENT_ATOL * max(v.l1_norm(), 1.0)
                step2.append(MomentCheck(k, tuple(x), m, power, res, direct, tol, mixed, err))
    if any(c.mixed for c in step2):
        notes.append("coincident poles: per-term moments are mixed, disentanglement not claimed")
    step3 = []
    for v in sc.fields:
        if v.decay is None:
            v = v.with_values(v.values, decay=box_certificate(v))
            notes.append("a field without a decay certificate was judged with the box certificate")
        step3.append(support_decision(v, sc.region, omega_samples, delta=support_delta))
    margins = {
        "constraint_residual": constraint_residual(sc),
        "kappa": sc.region.kappa,
        "margin": sc.region.margin(grid),
        "delta": step1.delta,
        "truncation": max((v.truncation_bound() for v in sc.fields), default=0.0),
    }
    return PipelineReport(step1, step2, step3, margins, flags, notes)


# --------------------------------------------------------------------------
# fixtures


def gaussian_basis(grid: GridSpec, region: RegionSpec, count: int, radius: float, width: float,
                   offset: float = 0.0) -> List[Field]:
    """Gaussians centred on a sphere of ``radius`` around the first O shape (zeroed on O)."""
    c = np.asarray(region.O[0].center, float)
    mask = region.O_mask(grid)
    n = grid.dim
    out = []
    for i in range(count):
        th = offset + 2 * math.pi * i / count
        if n == 1:
            d = np.array([1.0 if i % 2 == 0 else -1.0]) * (1 + 0.15 * (i // 2))
        elif n == 2:
            d = np.array([math.cos(th), math.sin(th)])
        else:
            ph = math.acos(1 - 2 * (i + 0.5) / count)
            d = np.array([math.sin(ph) * math.cos(th * 2.4), math.sin(ph) * math.sin(th * 2.4), math.cos(ph)])
        ctr = c + radius * d
        r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords(), ctr))
        vals = np.where(mask, 0, np.exp(-r2 / (2 * width ** 2)))
        out.append(Field(grid, vals.astype(complex), box_certificate(Field(grid, vals))))
    return out


@dataclass
class ProjectionResult:
    field: Field
    coefficients: np.ndarray
    residual: float
    rank: int


def constraint_projection(v: Field, alpha: float, basis: Sequence[Field], region: RegionSpec,
                          delta: float, stride: int = 1) -> ProjectionResult:
    """Correct ``v`` by a combination of ``basis`` so that ``(-Delta)^alpha`` of the
    result is at most about ``delta`` on O.

    The correction is the truncated-SVD least-squares solution with the
    smallest rank whose residual (sup over O nodes) drops below ``delta``;
    if no rank gets there the full-rank solution is returned.
    """
    pts = constraint_points(v.grid, region, stride)
    b = offsupport_frac_lap(v, alpha, pts, region)
    A = np.stack([offsupport_frac_lap(f, alpha, pts, region) for f in basis], axis=1)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    beta = U.conj().T @ (-b)
    best = None
    for r in range(0, len(s) + 1):
        c = Vh[:r].conj().T @ (beta[:r] / s[:r]) if r else np.zeros(len(basis), complex)
        res = float(np.max(np.abs(A @ c + b)))
        best = (c, res, r)
        if res <= delta:
            break
    c, res, r = best
    vals = v.values + sum(ci * f.values for ci, f in zip(c, basis))
    return ProjectionResult(v.with_values(vals), c, res, r)


# --------------------------------------------------------------------------
# the role of the separation hypothesis


def _isolated_limit(sc: FScenario, j: int, m: int, only: Optional[int]) -> complex:
    """Ladder limit at the j-th term's moment pole using all terms or only term ``only``."""
    n = sc.dim
    z0, order, _ = residue_pole(n, sc.alphas[j], m)
    ks = range(len(sc.alphas)) if only is None else [only]

    def f(z):
        return sum(mero_term(z, sc.alphas[k], sc.trace(k), n, guard=False) for k in ks)

    return circle_ladder(f, z0, order, _safe_radii(sc, z0), rtol=1.0).limit


def mixing_ratio(sc: FScenario, j: int, m: int) -> float:
    """``|full - isolated| / |isolated|`` for the j-pole limit: the other terms' share."""
    iso = _isolated_limit(sc, j, m, j)
    full = _isolated_limit(sc, j, m, None)
    return abs(full - iso) / max(abs(iso), 1e-300)


def rescale_change(sc: FScenario, j: int, other: int, m: int, factor: float = 10.0) -> float:
    """Relative change of term ``j``'s extracted moment when ``v_other`` is scaled."""
    a = residue_moment(sc, j, m, strict=False).moment
    b = residue_moment(sc.replace_field(other, sc.fields[other] * factor), j, m, strict=False).moment
    return abs(b - a) / max(abs(a), 1e-300)


@dataclass
class HReport:
    dim: int
    alphas_valid: tuple
    alphas_violating: tuple
    mixing_valid: List[float]
    mixing_violating: List[float]
    rescale_valid: List[float]
    rescale_violating: List[float]
    mixing_single: float
    tol: float = MOMENT_RTOL

    @property
    def shown(self) -> bool:
        return (max(self.mixing_valid) <= self.tol and max(self.rescale_valid) <= self.tol
                and min(self.mixing_violating) > 10 * self.tol and min(self.rescale_violating) > 10 * self.tol)

    def lines(self) -> List[str]:
        return [
            f"n = {self.dim}",
            f"separated alphas {self.alphas_valid}: mixing {max(self.mixing_valid):.2e}, rescale change {max(self.rescale_valid):.2e}",
            f"coincident alphas {self.alphas_violating}: mixing {min(self.mixing_violating):.2e}, rescale change {min(self.rescale_violating):.2e}",
            f"single term: mixing {self.mixing_single:.2e}",
        ]


def _shell_pair(dim: int):
    if dim == 2:
        grid = GridSpec(2, 12.0, 256)
        region = RegionSpec([Ball((0.0, 0.0), 1.0)], [Ball((0.0, 0.0), 0.3)], 0.3)
        centers = [(0.0, 0.0), (0.5, 0.0)]
        shells = [(3.5, 0.3), (4.0, 0.35)]
    elif dim == 3:
        grid = GridSpec(3, 10.0, 64)
        region = RegionSpec([Ball((0.0, 0.0, 0.0), 1.0)], [Ball((0.0, 0.0, 0.0), 0.3)], 0.3)
        centers = [(0.0, 0.0, 0.0), (0.25, 0.0, 0.0)]
        shells = [(4.0, 0.42), (4.5, 0.45)]
    else:
        grid = GridSpec(1, 12.0, 512)
        region = RegionSpec([Ball((0.0,), 1.0)], [Ball((0.0,), 0.3)], 0.3)
        centers = [(0.0,), (0.5,)]
        shells = [(3.5, 0.3), (4.0, 0.35)]
    from .analytic import GaussianShell, sample_analytic
    fields = [sample_analytic(grid, GaussianShell(c, R, w, 1.0)) for c, (R, w) in zip(centers, shells)]
    x = np.zeros(dim)
    return fields, region, x


def demonstrate_H_necessity(n: int = 2, ms: Sequence[int] = (0, 1), valid=(0.3, 0.75), violating=None) -> HReport:
    """Show how coinciding poles mix the terms' residues.

    With separated exponents the other term contributes nothing at the
    j-pole; with exponents whose poles coincide (equal fractional parts for
    even n, a half-integer shift for odd n) its share is of order one.
    """
    if violating is None:
        violating = (0.3, 0.3) if n % 2 == 0 else (0.3, 0.8)
    fields, region, x = _shell_pair(n)
    sv = FScenario(fields, list(valid), region, x)
    sb = FScenario(fields, list(violating), region, x, override=True)
    single = FScenario(fields[:1], [valid[0]], region, x)
    mv, mb, rv, rb = [], [], [], []
    shift = 0 if n % 2 == 0 else 1  # odd n: term 0's poles meet term 1's from m = 1 on
    for m in ms:
        mv.append(mixing_ratio(sv, 0, m))
        rv.append(rescale_change(sv, 0, 1, m))
        mb.append(mixing_ratio(sb, 0, m + shift))
        rb.append(rescale_change(sb, 0, 1, m + shift))
    ms1 = mixing_ratio(single, 0, ms[0])
    return HReport(n, tuple(valid), tuple(violating), mv, mb, rv, rb, ms1)
