"""Analytic test functions and their sampling onto grids.

Descriptors are small immutable objects that evaluate on coordinate meshes,
carry an envelope ``C exp(-rho |x|^gamma)`` when one is known, and print as
call expressions such as ``gaussian([0, 0], 1.0)`` that :func:`parse_descriptor`
reads back.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .grid import DecayCertificate, Field, GridError, GridSpec


class TruncationError(GridError):
    """The sampled function is not negligible at the box boundary."""


class DescriptorError(ValueError):
    pass


def _radius(coords, center):
    c = np.asarray(center, float)
    return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(coords, c)))


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, complex):
        return repr(v) if v.imag else repr(v.real)
    return repr(float(v))


class Descriptor:
    periodic = False  # exempt from the boundary check

    def evaluate(self, coords) -> np.ndarray:
        raise NotImplementedError

    def envelope(self, dim: int) -> Optional[DecayCertificate]:
        return None

    def describe(self) -> str:
        raise NotImplementedError

    def __add__(self, other):
        return Sum((self, other))

    def __mul__(self, c):
        return Scale(complex(c), self)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Gaussian(Descriptor):
    """``amp (4 pi a)^{-n/2} exp(-|x-c|^2 / (4a))``."""

    center: Tuple[float, ...]
    a: float
    amp: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DescriptorError("Gaussian width a must be positive and finite")

    def evaluate(self, coords):
        n = len(coords)
        r2 = _radius(coords, self.center) ** 2
        return self.amp * (4 * np.pi * self.a) ** (-n / 2) * np.exp(-r2 / (4 * self.a))

    def envelope(self, dim):
        peak = abs(self.amp) * (4 * np.pi * self.a) ** (-dim / 2)
        c2 = float(np.sum(np.asarray(self.center, float) ** 2))
        if c2 == 0:
            return DecayCertificate(peak, 1 / (4 * self.a), 2.0)
        # |x-c|^2 >= |x|^2/2 - |c|^2
        return DecayCertificate(peak * math.exp(c2 / (4 * self.a)), 1 / (8 * self.a), 2.0)

    def describe(self):
        return f"gaussian({_fmt(self.center)}, {_fmt(self.a)}, amp={_fmt(self.amp)})"


@dataclass(frozen=True)
class PolyGaussian(Descriptor):
    """``(x-c)^beta * Gaussian(c, a)`` with a multi-index ``beta``."""

    center: Tuple[float, ...]
    a: float
    powers: Tuple[int, ...]
    amp: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise DescriptorError("Gaussian width a must be positive")
        if any(int(p) != p or p < 0 for p in self.powers):
            raise DescriptorError("powers must be nonnegative integers")

    def evaluate(self, coords):
        g = Gaussian(self.center, self.a, self.amp).evaluate(coords)
        for x, c, p in zip(coords, self.center, self.powers):
            g = g * (x - c) ** int(p)
        return g

    def envelope(self, dim):
        k = sum(int(p) for p in self.powers)
        # |y|^k e^{-|y|^2/(8a)} <= (4 a k / e)^{k/2}
        poly = (4 * self.a * k / math.e) ** (k / 2) if k else 1.0
        peak = abs(self.amp) * (4 * np.pi * self.a) ** (-dim / 2) * poly
        c2 = float(np.sum(np.asarray(self.center, float) ** 2))
        return DecayCertificate(peak * math.exp(c2 / (8 * self.a)), 1 / (16 * self.a), 2.0)

    def describe(self):
        pw = "[" + ", ".join(str(int(p)) for p in self.powers) + "]"
        return f"polygauss({_fmt(self.center)}, {_fmt(self.a)}, {pw}, amp={_fmt(self.amp)})"


def _bump_profile(t):
    """``exp(1 - 1/(1 - t^2))`` on ``|t| < 1``, zero elsewhere; peak 1 at 0."""
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _compact_certificate(peak, support_radius):
    # any compact function satisfies the envelope with gamma = 2, rho = 1
    return DecayCertificate(peak * math.exp(support_radius ** 2), 1.0, 2.0)


@dataclass(frozen=True)
class Bump(Descriptor):
    """Smooth compactly supported bump on the ball ``B(c, radius)``."""

    center: Tuple[float, ...]
    radius: float
    amp: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise DescriptorError("bump radius must be positive")

    def evaluate(self, coords):
        return self.amp * _bump_profile(_radius(coords, self.center) / self.radius)

    def envelope(self, dim):
        R = float(np.linalg.norm(self.center)) + self.radius
        return _compact_certificate(abs(self.amp), R)

    def describe(self):
        return f"bump({_fmt(self.center)}, {_fmt(self.radius)}, amp={_fmt(self.amp)})"


@dataclass(frozen=True)
class AnnulusBump(Descriptor):
    """Radial smooth bump supported in ``r_in <= |x-c| <= r_out``."""

    center: Tuple[float, ...]
    r_in: float
    r_out: float
    amp: float = 1.0

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise DescriptorError("annulus needs 0 <= r_in < r_out")

    def evaluate(self, coords):
        mid = 0.5 * (self.r_in + self.r_out)
        half = 0.5 * (self.r_out - self.r_in)
        return self.amp * _bump_profile((_radius(coords, self.center) - mid) / half)

    def envelope(self, dim):
        return _compact_certificate(abs(self.amp), float(np.linalg.norm(self.center)) + self.r_out)

    def describe(self):
        return f"annulus({_fmt(self.center)}, {_fmt(self.r_in)}, {_fmt(self.r_out)}, amp={_fmt(self.amp)})"


@dataclass(frozen=True)
class GaussianShell(Descriptor):
    """``amp exp(-(|x-c| - R)^2 / (2 w^2))``: a band-limited stand-in for an annulus bump."""

    center: Tuple[float, ...]
    radius: float
    width: float
    amp: float = 1.0

    def __post_init__(self):
        if not (self.width > 0 and self.radius >= 0):
            raise DescriptorError("shell needs width > 0 and radius >= 0")

    def evaluate(self, coords):
        r = _radius(coords, self.center)
        return self.amp * np.exp(-((r - self.radius) ** 2) / (2 * self.width ** 2))

    def envelope(self, dim):
        R = self.radius + float(np.linalg.norm(self.center))
        # (r - R)^2 >= r^2/2 - R^2
        return DecayCertificate(abs(self.amp) * math.exp(R ** 2 / (2 * self.width ** 2)), 1 / (4 * self.width ** 2), 2.0)

    def describe(self):
        return f"shell({_fmt(self.center)}, {_fmt(self.radius)}, {_fmt(self.width)}, amp={_fmt(self.amp)})"


@dataclass(frozen=True)
class ExpDecay(Descriptor):
    """``amp exp(-|x-c|/length)``; deliberately not super-exponential."""

    center: Tuple[float, ...]
    length: float = 1.0
    amp: float = 1.0

    def evaluate(self, coords):
        return self.amp * np.exp(-_radius(coords, self.center) / self.length)

    def describe(self):
        return f"expdecay({_fmt(self.center)}, {_fmt(self.length)}, amp={_fmt(self.amp)})"


@dataclass(frozen=True)
class Constant(Descriptor):
    """Constant function, meaningful only on the periodic box."""

    value: complex = 1.0
    periodic = True

    def evaluate(self, coords):
        return np.full(coords[0].shape, complex(self.value))

    def describe(self):
        return f"const({_fmt(complex(self.value))})"


@dataclass(frozen=True)
class Sum(Descriptor):
    terms: Tuple[Descriptor, ...]

    @property
    def periodic(self):
        return any(t.periodic for t in self.terms)

    def evaluate(self, coords):
        out = 0
        for t in self.terms:
            out = out + t.evaluate(coords)
        return out

    def envelope(self, dim):
        envs = [t.envelope(dim) for t in self.terms]
        if any(e is None for e in envs):
            return None
        return DecayCertificate(sum(e.C for e in envs), min(e.rho for e in envs), min(e.gamma for e in envs))

    def describe(self):
        return "sum(" + ", ".join(t.describe() for t in self.terms) + ")"


@dataclass(frozen=True)
class Scale(Descriptor):
    factor: complex
    term: Descriptor

    @property
    def periodic(self):
        return self.term.periodic

    def evaluate(self, coords):
        return complex(self.factor) * self.term.evaluate(coords)

    def envelope(self, dim):
        e = self.term.envelope(dim)
        if e is None:
            return None
        return DecayCertificate(abs(self.factor) * e.C, e.rho, e.gamma)

    def describe(self):
        return f"scale({_fmt(complex(self.factor))}, {self.term.describe()})"


_REGISTRY = {
    "gaussian": Gaussian,
    "polygauss": PolyGaussian,
    "bump": Bump,
    "annulus": AnnulusBump,
    "shell": GaussianShell,
    "expdecay": ExpDecay,
    "const": Constant,
}


def _literal(node):
    try:
        return ast.literal_eval(node)
    except ValueError as exc:
        raise DescriptorError(f"unsupported literal: {ast.unparse(node)}") from exc


def _build(node):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise DescriptorError(f"expected a descriptor call, got {ast.unparse(node)}")
    name = node.func.id
    if name == "sum":
        return Sum(tuple(_build(a) for a in node.args))
    if name == "scale":
        if len(node.args) != 2:
            raise DescriptorError("scale takes (factor, descriptor)")
        return Scale(complex(_literal(node.args[0])), _build(node.args[1]))
    cls = _REGISTRY.get(name)
    if cls is None:
        raise DescriptorError(f"unknown descriptor {name!r}")
    args = []
    for a in node.args:
        v = _literal(a)
        args.append(tuple(v) if isinstance(v, list) else v)
    kwargs = {kw.arg: _literal(kw.value) for kw in node.keywords}
    try:
        return cls(*args, **kwargs)
    except TypeError as exc:
        raise DescriptorError(f"bad arguments for {name}: {exc}") from exc


def parse_descriptor(text: str) -> Descriptor:
    """Parse a descriptor expression such as ``sum(bump([1,0], 0.5), gaussian([0,0], 1.0))``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise DescriptorError(f"cannot parse descriptor {text!r}: {exc.msg}") from exc
    return _build(tree.body)


def sample_analytic(grid: GridSpec, spec, tol: float = 1e-10) -> Field:
    """Sample a descriptor at the grid nodes.

    The outermost layer of nodes must be below ``tol * max|u|`` unless the
    descriptor is periodic; otherwise :class:`TruncationError` is raised.
    """
    if isinstance(spec, str):
        spec = parse_descriptor(spec)
    vals = np.asarray(spec.evaluate(grid.coords()), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise DescriptorError("descriptor produced non-finite samples")
    if not spec.periodic:
        peak = np.max(np.abs(vals))
        edge = _boundary_max(vals)
        if peak > 0 and edge > tol * peak:
            raise TruncationError(f"function reaches {edge:.3g} at the box boundary (peak {peak:.3g}); enlarge L")
    return Field(grid, vals, spec.envelope(grid.dim))


def _boundary_max(vals):
    out = 0.0
    for ax in range(vals.ndim):
        for idx in (0, -1):
            out = max(out, float(np.max(np.abs(np.take(vals, idx, axis=ax)))))
    return out
