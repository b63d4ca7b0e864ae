"""Heat kernel, heat semigroup and the time integrals built on them.

Two heat semigroups appear here.  :func:`heat_evolve` and
:func:`frac_lap_heat` use the periodic spectral multiplier ``exp(-t|xi|^2)``
so they are consistent with :func:`~fraclab.grid.frac_lap_fourier`.  The
Mellin-type integrals use the free-space kernel summed over grid nodes
outside ``O`` (:class:`HeatTrace`); that sum is super-exponentially small
as ``t -> 0`` and matches the kernel sums of the meromorphic form of ``F``.

All time integrals use ``t = exp(u)`` and the trapezoid rule on a uniform
``u`` grid.  Beyond ``[u_min, u_max]`` the integrands are asymptotically
sums of exponentials in ``u``; those tails are added as geometric series,
which turns the rule into the (exponentially convergent) trapezoid rule on
the whole line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .gammafn import gamma_ratio, log_gamma
from .grid import Field, GridSpec, _apply_symbol, laplacian_power
from .regions import RegionSpec


class QuadratureError(ArithmeticError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: complex
    error: float
    truncation: float = 0.0

    def __complex__(self):
        return complex(self.value)


@dataclass(frozen=True)
class TimeQuadrature:
    """Trapezoid rule in ``u = log t`` split at ``t = 1``.

    ``nodes`` is the starting node count on ``[u_min, u_max]``; it is
    doubled until the rule and its every-other-node subrule agree to ``tol``.
    """

    u_min: float = -40.0
    u_max: float = 40.0
    nodes: int = 2048
    tol: float = 1e-8
    max_nodes: int = 1 << 16
    split_point: float = 1.0

    def __post_init__(self):
        if not self.u_min < 0 < self.u_max:
            raise ValueError("need u_min < 0 < u_max")
        if self.nodes < 8:
            raise ValueError("need at least 8 nodes")

    def grid(self, nodes: int):
        """Nodes and weights of the truncated line rule.

        Node 0 sits at ``u_min``.  Endpoints carry the full weight because
        the tails beyond them are summed separately as geometric series.
        """
        du = (self.u_max - self.u_min) / nodes
        u = self.u_min + du * np.arange(nodes + 1)
        return u, np.full(u.shape, du), du

    def halves(self, nodes: int):
        """Node sets for ``t in (0, 1]`` and ``t in (1, inf)``; ``nodes`` must be even."""
        u, w, _ = self.grid(nodes)
        left = u <= 0
        return (u[left], w[left]), (u[~left], w[~left])

    def calibrate(self) -> Estimate:
        """Integrate ``int_0^inf exp(-t) t^{-1/2} dt = sqrt(pi)`` with this rule."""
        def f(u):
            return np.exp(-np.exp(u) + 0.5 * u)

        tails = [(1.0, 0.5), (-1.0, 1.5)]  # exp(-t) ~ 1 - t as t -> 0
        est = integrate_log_time(f, self, left_tails=tails, right_tails=[])
        return Estimate(est.value, abs(est.value - math.sqrt(math.pi)))


def _geom_tail(coef, rate, u_edge, du, side):
    """``du * sum_{j>=1} coef * exp(rate * (u_edge -/+ j du))`` for a decaying exponential."""
    rate = complex(rate)
    if side == "left":
        # rate has positive real part, nodes go to -inf
        q = np.exp(-rate * du)
    else:
        q = np.exp(rate * du)  # rate has negative real part
    return du * coef * np.exp(rate * u_edge) * q / (1 - q)


def integrate_log_time(f: Callable[[np.ndarray], np.ndarray], quad: TimeQuadrature,
                       left_tails=(), right_tails=(), nodes: Optional[int] = None) -> Estimate:
    """Integrate ``g(u) = f(u)`` over the real line.

    ``left_tails``/``right_tails`` are lists of ``(coef, rate)`` such that
    ``g(u) ~ sum coef exp(rate u)`` beyond the respective end.  The error
    estimate compares the rule with its every-other-node subrule and never
    drops below the roundoff floor set by ``int |g|``.
    """
    n = quad.nodes if nodes is None else nodes
    while True:
        u, w, du = quad.grid(n)
        vals = np.asarray(f(u), dtype=complex)
        tot = np.sum(w * vals)
        tot += sum(_geom_tail(c, r, quad.u_min, du, "left") for c, r in left_tails)
        tot += sum(_geom_tail(c, r, quad.u_max, du, "right") for c, r in right_tails)
        # every-other-node subrule
        du2 = 2 * du
        sub = np.sum(vals[::2]) * du2
        sub += sum(_geom_tail(c, r, quad.u_min, du2, "left") for c, r in left_tails)
        sub += sum(_geom_tail(c, r, quad.u_max, du2, "right") for c, r in right_tails)
        err = abs(tot - sub)
        scale = max(abs(tot), 1e-300)
        # cancellation floor: oscillatory integrands can be far below their L1 size
        floor = 64 * np.finfo(float).eps * float(np.sum(w * np.abs(vals)))
        if err <= quad.tol * scale or err <= floor:
            return Estimate(complex(tot), float(max(err, floor)))
        if 2 * n > quad.max_nodes:
            raise QuadratureError(f"time quadrature did not reach tol {quad.tol}: estimate {err / scale:.3g}",
                                  Estimate(complex(tot), float(err)))
        n *= 2


# --------------------------------------------------------------------------
# kernel and semigroup


def heat_kernel_value(t: float, y, n: int) -> float:
    """``(4 pi t)^{-n/2} exp(-|y|^2 / (4t))``."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    y = np.atleast_1d(np.asarray(y, float))
    return float((4 * np.pi * t) ** (-n / 2) * np.exp(-np.dot(y, y) / (4 * t)))


def heat_kernel_field(grid: GridSpec, t: float, center=None) -> Field:
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    r2 = grid.radius(center) ** 2
    return Field(grid, (4 * np.pi * t) ** (-grid.dim / 2) * np.exp(-r2 / (4 * t)))


def heat_evolve(u: Field, t: float) -> Field:
    """Periodic heat semigroup ``exp(t Delta) u`` as the multiplier ``exp(-t|xi|^2)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return u
    return _apply_symbol(u, np.exp(-t * u.grid.xi_squared()), decay=None)


def _point_coefficients(u: Field, x):
    """Group the Fourier series of ``u`` at ``x`` by ``lambda = |xi|^2``."""
    g = u.grid
    x = np.atleast_1d(np.asarray(x, float))
    axes = tuple(range(g.dim))
    c = np.fft.fftn(u.values, axes=axes) / g.size
    xi = g.frequencies()
    phase = sum(k * (xc + g.half_width) for k, xc in zip(xi, x))
    c = c * np.exp(1j * phase)
    # integer labels: lambda = (pi/L)^2 * sum k^2
    kk = [np.rint(k * g.half_width / np.pi).astype(np.int64) for k in xi]
    lab = sum(k * k for k in kk).ravel()
    uniq, inv = np.unique(lab, return_inverse=True)
    coef = np.bincount(inv, weights=c.ravel().real, minlength=uniq.size) \
        + 1j * np.bincount(inv, weights=c.ravel().imag, minlength=uniq.size)
    lam = uniq * (np.pi / g.half_width) ** 2
    return lam, coef


def frac_lap_heat(u: Field, s: float, x, quad: Optional[TimeQuadrature] = None) -> Estimate:
    """``(1/Gamma(-s)) int_0^inf (exp(t Delta) u(x) - u(x)) t^{-1-s} dt`` by quadrature.

    The semigroup is the periodic one, so the result should equal the
    spectral ``(-Delta)^s u`` at ``x`` to the quadrature tolerance.  The
    truncation field of the result is the decay-envelope bound at ``L/2``.
    """
    if not 0 < s < 1:
        raise ValueError("frac_lap_heat needs 0 < s < 1")
    quad = quad or TimeQuadrature()
    lam, coef = _point_coefficients(u, x)
    nz = lam > 0
    lam, coef = lam[nz], coef[nz]
    blk = 256

    def integrand(uu):
        t = np.exp(uu)
        out = np.zeros(uu.shape, complex)
        for i in range(0, lam.size, blk):
            e = np.expm1(-np.outer(t, lam[i:i + blk]))
            out += e @ coef[i:i + blk]
        return out * np.exp(-s * uu)

    lap = np.sum(coef * lam)  # (-Delta u)(x)
    lap2 = np.sum(coef * lam ** 2)
    left = [(-lap, 1 - s), (0.5 * lap2, 2 - s)]
    right = [(-np.sum(coef), -s)]
    est = integrate_log_time(integrand, quad, left_tails=left, right_tails=right)
    g = complex(np.exp(-log_gamma(-s)))
    return Estimate(est.value * g, est.error * abs(g), u.truncation_bound())


# --------------------------------------------------------------------------
# free-space heat trace at a point


def _check_vanishing(v: Field, region: RegionSpec, tol: float):
    mask = region.O_mask(v.grid)
    peak = v.max_abs()
    inside = float(np.max(np.abs(v.values[mask]), initial=0.0))
    if peak > 0 and inside > tol * peak:
        raise PreconditionError(f"field does not vanish on O: max |v| there is {inside:.3g} (peak {peak:.3g})")
    return mask


@dataclass
class HeatTrace:
    """``H(t) = sum_{y not in O} p_t(x - y) v(y) h^n`` for one field and one point.

    Nodes are grouped by ``|x - y|^2`` so each time level costs one
    exponential per distinct distance.
    """

    dim: int
    d2: np.ndarray
    w: np.ndarray
    _cache: Dict[float, complex] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, v: Field, x, region: RegionSpec, tol: float = 1e-10, drop: float = 1e-18) -> "HeatTrace":
        g = v.grid
        x = np.atleast_1d(np.asarray(x, float))
        mask = _check_vanishing(v, region, tol)
        vals = np.where(mask, 0, v.values)
        peak = np.max(np.abs(vals), initial=0.0)
        keep = np.abs(vals) > drop * peak if peak > 0 else np.zeros(vals.shape, bool)
        if g.is_node(x):
            idx = np.array(g.nearest_index(x))
            offs = [np.rint((c[keep] - xc) / g.spacing).astype(np.int64) for c, xc in zip(g.coords(), x)]
            lab = sum(o * o for o in offs)
            uniq, inv = np.unique(lab, return_inverse=True)
            d2 = uniq * g.spacing ** 2
            del idx
        else:
            d2_all = sum((c[keep] - xc) ** 2 for c, xc in zip(g.coords(), x))
            d2, inv = np.unique(d2_all, return_inverse=True)
        wv = vals[keep] * g.cell_volume
        w = np.bincount(inv, weights=wv.real, minlength=d2.size) + 1j * np.bincount(inv, weights=wv.imag, minlength=d2.size)
        if d2.size and d2[0] == 0 and abs(w[0]) > 0:
            raise PreconditionError("the evaluation point carries mass; the small-t integral diverges")
        return cls(g.dim, d2, w)

    @property
    def mass(self) -> complex:
        return complex(self.w.sum())

    @property
    def l1(self) -> float:
        return float(np.abs(self.w).sum())

    def moment(self, power: float) -> complex:
        if self.d2.size == 0:
            return 0j
        return complex(np.sum(self.w * self.d2 ** (power / 2)))

    def scaled(self, u: np.ndarray):
        """``H(exp(u)) = S * exp(ell)`` returned as ``(S, ell)`` to avoid underflow at small t."""
        u = np.asarray(u, float).ravel()
        S = np.zeros(u.shape, complex)
        ell = np.zeros(u.shape)
        if self.d2.size == 0:
            return S, ell
        d0 = self.d2[np.abs(self.w) > 0].min() if np.any(self.w) else 0.0
        for i, uu in enumerate(u):
            key = float(uu)
            hit = self._cache.get(key)
            if hit is None:
                t = math.exp(uu)
                # factor out the nearest-shell Gaussian and the power of t
                sc = complex(np.dot(np.exp(-(self.d2 - d0) / (4 * t)), self.w))
                hit = (sc, -d0 / (4 * t) - (self.dim / 2) * (uu + math.log(4 * math.pi)))
                self._cache[key] = hit
            S[i], ell[i] = hit
        return S, ell

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """``H(exp(u))`` for an array of log-times."""
        S, ell = self.scaled(u)
        return (S * np.exp(ell)).reshape(np.shape(u))

    def tails(self, beta: complex, terms: int = 3):
        """Large-``t`` expansion of ``H(e^u) e^{-beta u}`` as ``(coef, rate)`` pairs."""
        out = []
        for k in range(terms):
            mk = complex(np.sum(self.w * self.d2 ** k)) if self.d2.size else 0j
            c = (4 * math.pi) ** (-self.dim / 2) * (-1) ** k * mk / (math.factorial(k) * 4 ** k)
            if c != 0:
                out.append((c, -(self.dim / 2 + k) - beta))
        return out

    def min_distance(self) -> float:
        nz = np.abs(self.w) > 0
        return float(np.sqrt(self.d2[nz].min())) if nz.any() else np.inf


def mellin_from_trace(trace: HeatTrace, beta: complex, quad: TimeQuadrature) -> Estimate:
    """``int_0^inf H(t) t^{-1-beta} dt`` for a prepared heat trace."""
    if trace.d2.size == 0 or not np.any(trace.w):
        return Estimate(0j, 0.0)
    beta = complex(beta)
    if trace.dim / 2 + beta.real <= 0:
        raise ValueError("integral diverges at large t")

    def f(u):
        S, ell = trace.scaled(u)
        return S * np.exp(ell - beta * u)

    return integrate_log_time(f, quad, right_tails=trace.tails(beta))


def mellin_G(v: Field, alpha: float, z: complex, x, region: RegionSpec,
             quad: Optional[TimeQuadrature] = None, trace: Optional[HeatTrace] = None) -> Estimate:
    """``G(z) = int_0^inf (exp(t Delta) v)(x) t^{-(z+1+alpha)} dt`` with the free-space kernel."""
    z = complex(z)
    if z.real < 0:
        raise ValueError("mellin_G needs Re z >= 0; use the meromorphic form for Re z < 0")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    quad = quad or TimeQuadrature()
    if trace is None:
        trace = HeatTrace.build(v, x, region)
    return mellin_from_trace(trace, z + alpha, quad)


def heat_bound_holds(trace: HeatTrace, kappa: float, quad: Optional[TimeQuadrature] = None) -> bool:
    """Check ``|H(t)| <= (4 pi t)^{-n/2} ||v||_1 exp(-kappa^2/t)`` at the quadrature nodes."""
    quad = quad or TimeQuadrature()
    u, _, _ = quad.grid(quad.nodes)
    t = np.exp(u)
    lhs = np.abs(trace(u))
    rhs = (4 * np.pi * t) ** (-trace.dim / 2) * trace.l1 * np.exp(-kappa ** 2 / t)
    return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-300))


def ibp_sides(v: Field, alpha: float, m: int, x, region: RegionSpec,
              quad: Optional[TimeQuadrature] = None):
    """Both sides of the m-fold integration by parts in time.

    Left: ``int (exp(t Delta) Delta^m v)(x) t^{-1-alpha} dt`` with the
    spectral ``Delta^m v``.  Right: ``c int (exp(t Delta) v)(x) t^{-m-1-alpha} dt``
    with ``c = Gamma(m+1+alpha)/Gamma(1+alpha)``.
    """
    if not 1 <= m <= 6:
        raise ValueError("m must lie in 1..6")
    quad = quad or TimeQuadrature()
    mask = _check_vanishing(v, region, 1e-10)
    w = laplacian_power(v, m)
    w = w.with_values(np.where(mask, 0, w.values))
    lhs = mellin_from_trace(HeatTrace.build(w, x, region, tol=np.inf), alpha, quad)
    rhs = mellin_from_trace(HeatTrace.build(v, x, region), m + alpha, quad)
    c = gamma_ratio(m, alpha)
    return lhs, Estimate(c * rhs.value, c * rhs.error)


def ibp_identity_residual(v: Field, alpha: float, m: int, x, region: RegionSpec,
                          quad: Optional[TimeQuadrature] = None) -> float:
    lhs, rhs = ibp_sides(v, alpha, m, x, region, quad)
    scale = max(abs(lhs.value), abs(rhs.value))
    if scale == 0:
        return 0.0
    return abs(lhs.value - rhs.value) / scale
