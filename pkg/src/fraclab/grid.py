"""Uniform periodic grids, sampled fields and the Fourier-multiplier engine.

The box ``[-L, L)^n`` with ``M`` nodes per axis stands in for R^n.  All
multipliers act on the discrete Fourier series of the samples, so they are
exact for band-limited grid functions.
"""
from __future__ import annotations

import functools
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class GridError(ValueError):
    pass


class MultiplierError(ArithmeticError):
    """A symbol evaluated to a non-finite value at a grid frequency."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.half_width > 0:
            raise GridError("half_width must be positive")
        m = int(self.points)
        if m < 8 or m & (m - 1):
            raise GridError(f"points per axis must be a power of two >= 8, got {self.points}")
        object.__setattr__(self, "points", m)
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    def coords(self) -> tuple:
        """Meshgrid of node coordinates (``ij`` indexing)."""
        return _coords(self)

    def points_array(self) -> np.ndarray:
        """Node coordinates as an array of shape ``(M**n, n)``."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def radius(self, center=None) -> np.ndarray:
        c = np.zeros(self.dim) if center is None else np.asarray(center, float)
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(self.coords(), c)))

    def frequencies(self) -> tuple:
        """Angular frequencies ``(pi/L) * k``, ``k = -M/2..M/2-1``, in FFT order."""
        return _freqs(self)

    def xi_squared(self) -> np.ndarray:
        return _xi2(self)

    def nearest_index(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, float))
        idx = np.rint((x + self.half_width) / self.spacing).astype(int)
        return tuple(int(i) % self.points for i in idx)

    def is_node(self, x, tol: float = 1e-12) -> bool:
        x = np.atleast_1d(np.asarray(x, float))
        k = (x + self.half_width) / self.spacing
        return bool(np.all(np.abs(k - np.rint(k)) <= tol * max(1.0, np.max(np.abs(k)))))


@functools.lru_cache(maxsize=16)
def _coords(grid: GridSpec) -> tuple:
    ax = grid.axis()
    out = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@functools.lru_cache(maxsize=16)
def _freqs(grid: GridSpec) -> tuple:
    k = 2.0 * np.pi * np.fft.fftfreq(grid.points, d=grid.spacing)
    out = np.meshgrid(*([k] * grid.dim), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@functools.lru_cache(maxsize=16)
def _xi2(grid: GridSpec) -> np.ndarray:
    out = sum(k ** 2 for k in _freqs(grid))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DecayCertificate:
    """Envelope ``|u(x)| <= C exp(-rho |x|^gamma)``."""

    C: float
    rho: float
    gamma: float
    zero_tail: bool = False
    residual: float = 0.0

    def __post_init__(self):
        if not self.zero_tail and not (self.gamma > 1 and self.rho > 0):
            raise GridError(f"decay certificate needs gamma > 1 and rho > 0, got {self.gamma}, {self.rho}")

    def bound(self, r):
        if self.zero_tail:
            return np.zeros_like(np.asarray(r, float))
        return self.C * np.exp(-self.rho * np.asarray(r, float) ** self.gamma)


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray
    decay: Optional[DecayCertificate] = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} samples, got {vals.size}")
        vals = vals.reshape(self.grid.shape).copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, decay="keep") -> "Field":
        return Field(self.grid, values, self.decay if decay == "keep" else decay)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values, _merge_decay(self.decay, other.decay))

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values, _merge_decay(self.decay, other.decay))

    def __mul__(self, c) -> "Field":
        c = complex(c)
        dec = None
        if self.decay is not None:
            d = self.decay
            dec = DecayCertificate(abs(c) * d.C, d.rho, d.gamma, d.zero_tail, d.residual)
        return Field(self.grid, c * self.values, dec)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> complex:
        return complex(self.values.sum() * self.grid.cell_volume)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.cell_volume)

    def at(self, x) -> complex:
        """Sample at a grid node (raises if ``x`` is not a node)."""
        if not self.grid.is_node(x):
            raise GridError(f"{x} is not a grid node; use evaluate_points")
        return complex(self.values[self.grid.nearest_index(x)])

    def truncation_bound(self) -> float:
        """Envelope value at half the box width, or inf without a certificate."""
        if self.decay is None:
            return float("inf")
        return float(self.decay.bound(self.grid.half_width / 2))


def _same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def _merge_decay(a, b):
    if a is None or b is None:
        return None
    if a.zero_tail and b.zero_tail:
        return a
    if a.zero_tail:
        return b
    if b.zero_tail:
        return a
    gamma = min(a.gamma, b.gamma)
    rho = min(a.rho, b.rho)
    return DecayCertificate(a.C + b.C, rho, gamma)


def zeros(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.shape, complex), DecayCertificate(0.0, 1.0, 2.0, zero_tail=True))


# --------------------------------------------------------------------------
# multipliers


def fourier_multiplier(u: Field, symbol: Callable[[tuple], np.ndarray]) -> Field:
    """Return ``F^{-1}[ symbol(xi) * F u ]`` on the periodic grid.

    ``symbol`` receives the tuple of frequency meshes (FFT order) and must
    return an array broadcastable to the grid shape.
    """
    xi = u.grid.frequencies()
    sig = np.broadcast_to(np.asarray(symbol(xi)), u.grid.shape)
    bad = ~np.isfinite(sig)
    if bad.any():
        idx = np.argwhere(bad)[0]
        freq = tuple(float(k[tuple(idx)]) for k in xi)
        raise MultiplierError(f"symbol is not finite at frequency {freq}")
    return _apply_symbol(u, sig)


def _apply_symbol(u: Field, sig: np.ndarray, decay="keep") -> Field:
    axes = tuple(range(u.grid.dim))
    out = np.fft.ifftn(sig * np.fft.fftn(u.values, axes=axes), axes=axes)
    return u.with_values(out, decay)


def frac_lap_symbol(grid: GridSpec, s: float) -> np.ndarray:
    """``|xi|^{2s}`` with the value 0 at ``xi = 0`` for ``s > 0``."""
    if s < 0:
        raise ValueError("fractional order must be nonnegative")
    xi2 = grid.xi_squared()
    if s == 0:
        return np.ones_like(xi2)
    out = np.zeros_like(xi2)
    nz = xi2 > 0
    out[nz] = xi2[nz] ** s
    return out


def frac_lap_fourier(u: Field, s: float) -> Field:
    """Periodic spectral ``(-Delta)^s u``; ``s = 0`` is the identity."""
    if s == 0:
        return u
    return _apply_symbol(u, frac_lap_symbol(u.grid, s), decay=None)


def laplacian_power(u: Field, m: int) -> Field:
    """Spectral ``Delta^m u`` (note the sign: symbol ``(-|xi|^2)^m``)."""
    if m == 0:
        return u
    return _apply_symbol(u, (-u.grid.xi_squared()) ** m, decay=None)


_THREADS = {"n": 0}


def set_threads(n: int) -> None:
    """Thread count handed to the NUFFT (0 lets the library decide)."""
    _THREADS["n"] = max(int(n), 0)


def evaluate_points(u: Field, pts, direct: bool = False, eps: float = 1e-14) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``u`` at arbitrary points.

    ``pts`` has shape ``(P, n)``.  Uses a type-2 NUFFT when available;
    ``direct=True`` forces the O(P M^n) summation.
    """
    g = u.grid
    pts = np.atleast_2d(np.asarray(pts, float))
    if pts.shape[1] != g.dim:
        raise GridError(f"points must have {g.dim} columns")
    axes = tuple(range(g.dim))
    # coefficients in increasing mode order k = -M/2..M/2-1, relative to x = -L
    coef = np.fft.fftshift(np.fft.fftn(u.values, axes=axes), axes=axes) / g.size
    # phase variable theta = pi (x + L) / L in [0, 2 pi)
    theta = (pts + g.half_width) * (np.pi / g.half_width)
    if not direct:
        try:
            import finufft
        except ImportError:  # pragma: no cover - finufft is a declared dependency
            direct = True
    if direct:
        k = np.arange(-g.points // 2, g.points // 2)
        out = coef
        # contract one axis at a time: out[p, ...]
        e0 = np.exp(1j * np.outer(theta[:, 0], k))
        out = np.tensordot(e0, coef, axes=([1], [0]))  # (P, M, ..)
        for d in range(1, g.dim):
            ed = np.exp(1j * np.outer(theta[:, d], k))
            out = np.einsum("pk,pk...->p...", ed, out)
        return out
    th = [np.ascontiguousarray(theta[:, d]) for d in range(g.dim)]
    c = np.ascontiguousarray(coef.astype(np.complex128))
    kw = {"nthreads": _THREADS["n"]} if _THREADS["n"] else {}
    if g.dim == 1:
        return finufft.nufft1d2(th[0], c, eps=eps, isign=1, **kw)
    if g.dim == 2:
        return finufft.nufft2d2(th[0], th[1], c, eps=eps, isign=1, **kw)
    return finufft.nufft3d2(th[0], th[1], th[2], c, eps=eps, isign=1, **kw)


# --------------------------------------------------------------------------
# binary snapshots

_MAGIC = b"FRL1"


def write_snapshot(path, u: Field) -> None:
    """Write the FRL1 snapshot.

    Layout: magic, dim (u8), M (u32 LE), L (f64 LE), certificate flag (u8),
    then M^n interleaved (re, im) f64 LE samples in C order.  When the flag
    is 1 a trailer of three f64 (C, rho, gamma) follows the samples.
    """
    g = u.grid
    flag = 1 if (u.decay is not None and not u.decay.zero_tail) else (2 if u.decay is not None else 0)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BIdB", g.dim, g.points, g.half_width, flag))
        data = np.empty(2 * g.size, dtype="<f8")
        v = u.values.ravel()
        data[0::2] = v.real
        data[1::2] = v.imag
        fh.write(data.tobytes())
        if flag == 1:
            fh.write(struct.pack("<ddd", u.decay.C, u.decay.rho, u.decay.gamma))


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise GridError("not an FRL1 snapshot")
    dim, m, L, flag = struct.unpack_from("<BIdB", blob, 4)
    grid = GridSpec(dim, L, m)
    off = 4 + struct.calcsize("<BIdB")
    n = 2 * grid.size
    data = np.frombuffer(blob, dtype="<f8", count=n, offset=off)
    vals = data[0::2] + 1j * data[1::2]
    decay = None
    if flag == 1:
        C, rho, gamma = struct.unpack_from("<ddd", blob, off + 8 * n)
        decay = DecayCertificate(C, rho, gamma)
    elif flag == 2:
        decay = DecayCertificate(0.0, 1.0, 2.0, zero_tail=True)
    return Field(grid, vals, decay)


def sample_points(grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """Coordinates of the nodes selected by a boolean mask, shape ``(K, n)``."""
    return np.stack([c[mask] for c in grid.coords()], axis=1)


def as_points(x: Sequence[float] | float, dim: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, float))
    if x.shape != (dim,):
        raise GridError(f"point must have {dim} coordinates")
    return x
