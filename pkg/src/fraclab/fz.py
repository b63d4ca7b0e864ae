"""The function F(z), its meromorphic form, poles, residues and moments.

For fields ``v_k`` vanishing on ``O`` and a point ``x`` in ``omega``::

    F(z) = sum_k Gamma(z+1+a_k) / (Gamma(-a_k) Gamma(1+a_k)) * G_k(z)          (Re z >= 0)
         = sum_k 4^{a_k+z} pi^{-n/2} Gamma(z+1+a_k) Gamma(z+n/2+a_k)
                 / (Gamma(-a_k) Gamma(1+a_k)) * sum_{y not in O} v_k(y) |x-y|^{-n-2a_k-2z} h^n

The second form is what the grid actually sums; exchanging the time and
space integrals in the first form gives it exactly node by node, so the
two differ only by time-quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from .exponents import HypothesisViolation, validate_alphas
from .gammafn import gamma_residue, log_gamma
from .grid import Field, GridError
from .heat import (Estimate, HeatTrace, PreconditionError, TimeQuadrature,
                   mellin_from_trace)
from .regions import RegionSpec

POLE_GUARD = 1e-6
LADDER_RADII = (1e-1, 3e-2, 1e-2, 3e-3)
LADDER_POINTS = 8
LADDER_RTOL = 1e-4
M_CAP = 8


class PoleProximityError(ArithmeticError):
    pass


class LadderError(ArithmeticError):
    def __init__(self, msg, ladder=None):
        super().__init__(msg)
        self.ladder = ladder


@dataclass
class FScenario:
    """Fields ``v_k`` with fractional exponents ``alpha_k`` (weights already folded in)."""

    fields: List[Field]
    alphas: List[float]
    region: RegionSpec
    x: np.ndarray
    override: bool = False
    vanish_tol: float = 1e-10
    _traces: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.fields) != len(self.alphas) or not self.fields:
            raise ValueError("need one alpha per field")
        grids = {f.grid for f in self.fields}
        if len(grids) != 1:
            raise GridError("scenario fields live on different grids")
        self.x = np.atleast_1d(np.asarray(self.x, float))
        if self.x.shape != (self.dim,):
            raise GridError("evaluation point has the wrong dimension")
        for a in self.alphas:
            if not 0 < a < 1:
                raise ValueError(f"fractional exponent {a} outside (0, 1)")
        if not self.region.in_omega(self.x[None])[0]:
            raise PreconditionError(f"x = {self.x} is not in omega")
        self.hypothesis = validate_alphas(self.alphas, self.dim)
        if not self.hypothesis.ok and not self.override:
            raise HypothesisViolation(self.hypothesis)

    @property
    def grid(self):
        return self.fields[0].grid

    @property
    def dim(self) -> int:
        return self.fields[0].grid.dim

    def trace(self, k: int) -> HeatTrace:
        if k not in self._traces:
            self._traces[k] = HeatTrace.build(self.fields[k], self.x, self.region, tol=self.vanish_tol)
        return self._traces[k]

    def at(self, x) -> "FScenario":
        return FScenario(self.fields, self.alphas, self.region, x, self.override, self.vanish_tol)

    def replace_field(self, k: int, v: Field) -> "FScenario":
        fields = list(self.fields)
        fields[k] = v
        return FScenario(fields, self.alphas, self.region, self.x, self.override, self.vanish_tol)


def _log_inv_gamma_pair(a: float) -> complex:
    """``-log(Gamma(-a) Gamma(1+a))``; note ``Gamma(-a) Gamma(1+a) = -pi / sin(pi a)``."""
    return -(log_gamma(-a) + log_gamma(1 + a))


def _right_prefactor(z: complex, a: float) -> complex:
    return np.exp(log_gamma(z + 1 + a) + _log_inv_gamma_pair(a))


def F_right(z: complex, sc: FScenario, quad: Optional[TimeQuadrature] = None) -> Estimate:
    """Heat-semigroup form of ``F`` on the closed right half-plane."""
    z = complex(z)
    if z.real < 0:
        raise ValueError("F_right needs Re z >= 0")
    quad = quad or TimeQuadrature()
    val, err = 0j, 0.0
    for k, a in enumerate(sc.alphas):
        g = mellin_from_trace(sc.trace(k), z + a, quad)
        c = _right_prefactor(z, a)
        val += c * g.value
        err += abs(c) * g.error
    return Estimate(val, err)


def _near_pole(w: complex) -> bool:
    return w.real <= POLE_GUARD and abs(w - round(w.real)) < POLE_GUARD


def mero_term(z: complex, a: float, trace: HeatTrace, n: int, guard: bool = True) -> complex:
    """One term of the meromorphic form (spatial sum excludes ``O``)."""
    w1, w2 = z + 1 + a, z + n / 2 + a
    if guard and (_near_pole(w1) or _near_pole(w2)):
        raise PoleProximityError(f"z = {z} is within {POLE_GUARD} of a pole; use residue_moment")
    if trace.d2.size == 0 or not np.any(trace.w):
        return 0j
    logpref = (a + z) * math.log(4) - (n / 2) * math.log(math.pi) \
        + log_gamma(w1) + log_gamma(w2) + _log_inv_gamma_pair(a)
    s = np.dot(trace.w, np.exp(-(n / 2 + a + z) * np.log(trace.d2)))
    return complex(np.exp(logpref) * s)


def F_mero(z: complex, sc: FScenario) -> complex:
    """Meromorphic form of ``F``; raises near a pole."""
    z = complex(z)
    return sum(mero_term(z, a, sc.trace(k), sc.dim) for k, a in enumerate(sc.alphas))


def offsupport_frac_lap(v: Field, alpha: float, pts, region: RegionSpec) -> np.ndarray:
    """``(-Delta)^alpha v`` at points in ``O`` from the kernel form.

    For ``x`` outside the support, ``(-Delta)^a v(x) = c_{n,a} int v(y) |x-y|^{-n-2a} dy``
    with ``c_{n,a} = 4^a Gamma(n/2+a) / (pi^{n/2} Gamma(-a))``.  Nodes in ``O``
    are excluded from the sum, so this is the value of ``F(0)`` at each point.
    """
    g = v.grid
    n = g.dim
    pts = np.atleast_2d(np.asarray(pts, float))
    mask = region.O_mask(g)
    keep = (~mask) & (np.abs(v.values) > 0)
    ys = np.stack([c[keep] for c in g.coords()], axis=1)
    w = v.values[keep] * g.cell_volume
    c = complex(np.exp(alpha * math.log(4) + log_gamma(n / 2 + alpha) - (n / 2) * math.log(math.pi) - log_gamma(-alpha)))
    out = np.empty(len(pts), complex)
    for i in range(0, len(pts), 64):
        p = pts[i:i + 64]
        d2 = np.sum((p[:, None, :] - ys[None, :, :]) ** 2, axis=-1)
        out[i:i + 64] = (d2 ** (-(n / 2 + alpha))) @ w
    return c * out


def constraint_residual(sc: FScenario, pts=None) -> float:
    """``max |sum_k (-Delta)^{a_k} v_k|`` over sample points of ``O`` (default: the O nodes)."""
    if pts is None:
        pts = constraint_points(sc.grid, sc.region)
    tot = sum(offsupport_frac_lap(v, a, pts, sc.region) for v, a in zip(sc.fields, sc.alphas))
    return float(np.max(np.abs(tot)))


def constraint_points(grid, region: RegionSpec, stride: int = 1) -> np.ndarray:
    mask = region.O_mask(grid)
    if stride > 1:
        sub = np.zeros_like(mask)
        sub[tuple(slice(None, None, stride) for _ in range(grid.dim))] = True
        mask = mask & sub
    return np.stack([c[mask] for c in grid.coords()], axis=1)


# --------------------------------------------------------------------------
# integers, growth


@dataclass
class IntegerTable:
    m: List[int]
    values: List[complex]
    bounds: List[float]
    delta: float
    constants: List[float]

    @property
    def residuals(self) -> List[float]:
        return [abs(v) for v in self.values]

    @property
    def passed(self) -> bool:
        return all(abs(v) <= b for v, b in zip(self.values, self.bounds))

    @property
    def observed_constant(self) -> float:
        """``max |F(m)| / delta`` (the C actually realised)."""
        if self.delta == 0:
            return 0.0 if max(self.residuals, default=0) == 0 else math.inf
        return max(self.residuals, default=0.0) / self.delta


def integer_bound_constant(sc: FScenario, m: int) -> float:
    """Heuristic constant ``(2m)! n^m / rho^{2m}`` with ``rho`` the distance from x to the complement of O.

    ``F(m)`` is ``Delta^m`` of ``g = sum_k (-Delta)^{a_k} v_k``, which is real
    analytic on ``O``; a Cauchy-type estimate turns ``sup_O |g| <= delta``
    into this bound.  It is an engineering choice, not a theorem.
    """
    g = sc.grid
    pts = g.points_array()
    outside = pts[~sc.region.in_O(pts)]
    rho = float(np.min(np.linalg.norm(outside - sc.x, axis=1))) if len(outside) else g.half_width
    n = sc.dim
    return math.factorial(2 * m) * n ** m / rho ** (2 * m)


def check_F_at_integers(sc: FScenario, M_max: int, delta: Optional[float] = None) -> IntegerTable:
    """``|F(m)|`` for ``m = 1..M_max`` against ``C_m * delta``.

    ``delta`` defaults to the measured constraint residual on the O nodes.
    """
    if delta is None:
        delta = constraint_residual(sc)
    ms = list(range(1, M_max + 1))
    vals = [F_mero(m, sc) for m in ms]
    consts = [integer_bound_constant(sc, m) for m in ms]
    return IntegerTable(ms, vals, [c * delta for c in consts], delta, consts)


def pila_growth_diagnostics(sc: FScenario, quad: Optional[TimeQuadrature] = None,
                            window=(20.0, 30.0), samples: int = 11, eps: float = 0.1,
                            floor: float = 1e-300) -> dict:
    """Empirical growth rates of ``F`` against the ``beta = -1/2``, ``alpha = 1`` envelopes.

    Reports ``max log|F(ib)|/(pi|b|)`` and ``max log|F(a)|/(2 a log a)`` over
    the window and ``max log|F(z)|/|z|^{2-eps}`` on a half-disc sample.  Values
    below ``floor`` are reported as ``-inf``.
    """
    quad = quad or TimeQuadrature()

    def logabs(z):
        e = F_right(z, sc, quad)
        a = abs(e.value)
        return (math.log(a) if a > floor else -math.inf), (e.error / a if a > 0 else 0.0)

    bs = np.linspace(window[0], window[1], samples)
    imag, noise = [], []
    for b in bs:
        for sgn in (1, -1):
            la, rel = logabs(1j * sgn * b)
            imag.append(la / (math.pi * b))
            noise.append(rel)
    real = []
    for a in bs:
        la, rel = logabs(a)
        real.append(la / (2 * a * math.log(a)))
        noise.append(rel)
    disc = []
    for r in (5.0, 10.0, 20.0, 30.0):
        for th in np.linspace(-np.pi / 2, np.pi / 2, 7):
            z = r * np.exp(1j * th)
            la, rel = logabs(complex(max(z.real, 0.0), z.imag))
            disc.append(la / r ** (2 - eps))
            noise.append(rel)
    return {
        "imag_axis_rate": max(imag),
        "imag_axis_envelope": -0.5,
        "real_axis_rate": max(real),
        "real_axis_envelope": 1.0,
        "order_rate": max(disc),
        "order_exponent": 2 - eps,
        "noise_floor": max(noise),
        "window": tuple(window),
    }


# --------------------------------------------------------------------------
# poles and residues


@dataclass(frozen=True)
class PoleDescriptor:
    location: complex
    order: int
    term_index: int
    m: int
    family: str  # "A": Gamma(z+1+a), "B": Gamma(z+n/2+a), "AB": both
    terms: tuple = ()
    coincident: bool = False


def _term_poles(a: float, n: int, max_m: int):
    """Poles of one term as ``{j: families}`` with ``z = -a - j/2`` indexing half-steps."""
    out = {}
    for m in range(max_m + 1):
        out.setdefault(2 * (m + 1), set()).add("A")
        out.setdefault(2 * m + n, set()).add("B")
    return out


def poles_of(sc_or_alphas, max_m: int, n: Optional[int] = None) -> List[PoleDescriptor]:
    """Enumerate the poles ``-a_k-m-1`` and ``-a_k-m-n/2``, merging coincidences."""
    if isinstance(sc_or_alphas, FScenario):
        alphas, n = sc_or_alphas.alphas, sc_or_alphas.dim
    else:
        alphas = list(sc_or_alphas)
    raw = []
    for k, a in enumerate(alphas):
        for j2, fams in sorted(_term_poles(a, n, max_m).items()):
            loc = -a - j2 / 2
            fam = "AB" if len(fams) == 2 else next(iter(fams))
            m = (j2 // 2 - n // 2) if (n % 2 == 0 and fam == "AB") else (j2 // 2 - 1 if "A" in fam else (j2 - n) // 2)
            raw.append((loc, len(fams), k, m, fam))
    raw.sort(key=lambda r: (-r[0], r[2]))
    out: List[PoleDescriptor] = []
    used = [False] * len(raw)
    for i, r in enumerate(raw):
        if used[i]:
            continue
        group = [r]
        for j in range(i + 1, len(raw)):
            if not used[j] and abs(raw[j][0] - r[0]) < 1e-9:
                group.append(raw[j])
                used[j] = True
        terms = tuple(sorted({g[2] for g in group}))
        coincident = len(terms) > 1
        out.append(PoleDescriptor(complex(r[0]), max(g[1] for g in group), r[2], r[3], r[4], terms, coincident))
    return out


@dataclass
class Ladder:
    radii: tuple
    values: List[complex]
    extrapolants: List[complex]
    converged: bool

    @property
    def limit(self) -> complex:
        return self.extrapolants[-1]


def circle_ladder(fun, z0: complex, order: int, radii=LADDER_RADII, points: int = LADDER_POINTS,
                  rtol: float = LADDER_RTOL, atol: float = 0.0) -> Ladder:
    """Limit of ``(z - z0)^order f(z)`` as ``z -> z0``.

    Each rung is the mean over ``points`` equispaced nodes on ``|z - z0| = r``;
    for a function holomorphic at ``z0`` that mean is exact up to
    ``O(r^points)``, so Richardson steps eliminate ``r^points``.
    """
    th = 2 * np.pi * (np.arange(points) + 0.5) / points
    vals = []
    for r in radii:
        zs = z0 + r * np.exp(1j * th)
        vals.append(complex(np.mean([(z - z0) ** order * fun(z) for z in zs])))
    ext = list(vals[:1])
    for i in range(1, len(radii)):
        q = (radii[i - 1] / radii[i]) ** points
        ext.append((q * vals[i] - vals[i - 1]) / (q - 1))
    conv = abs(ext[-1] - ext[-2]) <= rtol * abs(ext[-1]) + atol
    return Ladder(tuple(radii), vals, ext, bool(conv))


def circle_max(fun, z0: complex, order: int, r: float, points: int = LADDER_POINTS) -> float:
    th = 2 * np.pi * (np.arange(points) + 0.5) / points
    return max(abs((z - z0) ** order * fun(z)) for z in z0 + r * np.exp(1j * th))


def _safe_radii(sc: FScenario, z0: complex, radii=LADDER_RADII):
    """Shrink the ladder so no other pole lies within twice the largest radius."""
    others = [p.location for p in poles_of(sc, M_CAP + 2) if abs(p.location - z0) > 1e-9]
    dmin = min((abs(p - z0) for p in others), default=np.inf)
    scale = min(1.0, 0.5 * dmin / radii[0])
    return tuple(r * scale for r in radii)


def residue_pole(n: int, alpha: float, m: int):
    """Pole location, order and kernel power used to extract the m-th moment of one term."""
    if n % 2 == 0:
        p = n // 2
        return complex(-m - p - alpha), 2, 2 * m
    p = (n + 1) // 2
    return complex(-m - 1 - alpha), 1, 2 * m - 2 * p + 3


def moment_prefactor(n: int, alpha: float, m: int) -> complex:
    """Constant P with ``lim (z-z0)^order F_j(z) = P * int v_j |x-y|^power``."""
    inv = complex(np.exp(_log_inv_gamma_pair(alpha)))
    if n % 2 == 0:
        p = n // 2
        lead = (-1) ** (p - 1) / (math.factorial(m) * math.factorial(m + p - 1))
        return 4.0 ** (-m - p) / math.pi ** p * lead * inv
    p = (n + 1) // 2
    g = complex(np.exp(log_gamma(p - m - 1.5)))
    return 4.0 ** (-m - 1) / math.pi ** (n / 2) * gamma_residue(m) * g * inv


def gamma_product_limit(n: int, alpha: float, m: int) -> tuple:
    """Ladder estimate and exact value of ``lim (z-z0)^2 Gamma(z+1+a) Gamma(z+p+a)`` (even n)."""
    if n % 2:
        raise ValueError("defined for even n")
    p = n // 2
    z0 = complex(-m - p - alpha)

    def f(z):
        return np.exp(log_gamma(z + 1 + alpha) + log_gamma(z + p + alpha))

    lad = circle_ladder(f, z0, 2, rtol=1e-12)
    exact = (-1) ** (p - 1) / (math.factorial(m) * math.factorial(m + p - 1))
    return complex(lad.limit), exact


@dataclass
class ResidueResult:
    term: int
    m: int
    pole: complex
    order: int
    power: int
    limit: complex
    prefactor: complex
    moment: complex
    ladder: Ladder
    mixed: bool = False


def residue_moment(sc: FScenario, j: int, m: int, strict: bool = True) -> ResidueResult:
    """Extract ``int v_j |x-y|^power`` from the pole of ``F`` at ``z0``.

    Even ``n = 2p``: ``z0 = -m-p-a_j``, double pole, even power ``2m``.
    Odd ``n = 2p-1``: ``z0 = -m-1-a_j``, simple pole, power ``2m-2p+3``.
    """
    if not 0 <= m <= M_CAP:
        raise ValueError(f"m must lie in 0..{M_CAP}")
    n = sc.dim
    a = sc.alphas[j]
    z0, order, power = residue_pole(n, a, m)
    radii = _safe_radii(sc, z0)

    def f(z):
        return sum(mero_term(z, ak, sc.trace(k), n, guard=False) for k, ak in enumerate(sc.alphas))

    scale = max(circle_max(f, z0, order, radii[0]), 1e-300)
    lad = circle_ladder(f, z0, order, radii, atol=1e-13 * scale)
    if strict and not lad.converged:
        raise LadderError(f"residue ladder did not converge at z0 = {z0}: {lad.extrapolants}", lad)
    pref = moment_prefactor(n, a, m)
    mixed = any(abs(p.location - z0) < 1e-9 and p.coincident for p in poles_of(sc, m + 1))
    return ResidueResult(j, m, z0, order, power, lad.limit, pref, lad.limit / pref, lad, mixed)


def pole_order_check(sc: FScenario, pole: PoleDescriptor, radii=(1e-2, 1e-3, 1e-4)) -> dict:
    """Exponent ``order-1`` diverges on shrinking circles while ``order`` converges."""
    n = sc.dim

    def f(z):
        return sum(mero_term(z, ak, sc.trace(k), n, guard=False) for k, ak in enumerate(sc.alphas))

    below = [circle_max(f, pole.location, pole.order - 1, r) for r in radii]
    diverges = all(b2 > 5 * b1 for b1, b2 in zip(below, below[1:]))
    lad = circle_ladder(f, pole.location, pole.order, _safe_radii(sc, pole.location),
                        atol=1e-13 * max(below[0], 1e-300))
    return {"diverges_below": diverges, "converges_at_order": lad.converged, "below": below, "limit": lad.limit}


def moment_direct(v: Field, x, power: float, region: Optional[RegionSpec] = None,
                  vanish_tol: float = 1e-10) -> Estimate:
    """Grid quadrature of ``int v(y) |x-y|^power dy`` (O nodes excluded when a region is given).

    Negative powers are accepted when ``v`` vanishes near ``x``.  The
    truncation entry bounds the part of the integral outside the box from
    the decay certificate.
    """
    g = v.grid
    x = np.atleast_1d(np.asarray(x, float))
    if power > 2 * M_CAP + 1:
        raise ValueError("power exceeds the supported range")
    if v.decay is None and power >= 2:
        raise PreconditionError("no decay certificate: refusing a moment of order >= 2")
    vals = v.values
    if region is not None:
        vals = np.where(region.O_mask(g), 0, vals)
    d = np.sqrt(sum((c - xc) ** 2 for c, xc in zip(g.coords(), x)))
    if power < 0:
        near = d < 2 * g.spacing
        if np.any(np.abs(vals[near]) > vanish_tol * max(v.max_abs(), 1e-300)):
            raise PreconditionError("negative power needs v to vanish near x")
        vals = np.where(near, 0, vals)
        d = np.where(near, 1.0, d)
    val = complex(np.sum(vals * d ** power) * g.cell_volume)
    return Estimate(val, 0.0, _moment_tail(v, x, power))


def _moment_tail(v: Field, x, power) -> float:
    dec = v.decay
    if dec is None or dec.zero_tail:
        return 0.0
    n = v.grid.dim
    L = v.grid.half_width
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    rx = float(np.linalg.norm(x))

    def f(r):
        return dec.C * math.exp(-dec.rho * r ** dec.gamma) * (r + rx) ** max(power, 0) * r ** (n - 1)

    val, _ = integrate.quad(f, L, np.inf, limit=200)
    return float(area * val)


def moment_table(sc: FScenario, ms: Sequence[int]) -> List[ResidueResult]:
    return [residue_moment(sc, k, m) for k in range(len(sc.alphas)) for m in ms]
