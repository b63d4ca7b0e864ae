"""Open-set descriptors (unions of balls and boxes) and the observation region."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .grid import GridSpec


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class Ball:
    center: Tuple[float, ...]
    radius: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, float)
        return np.sum((pts - c) ** 2, axis=-1) < self.radius ** 2

    def shrink(self, eps: float) -> "Ball":
        if eps >= self.radius:
            raise RegionError(f"cannot shrink ball of radius {self.radius} by {eps}")
        return Ball(self.center, self.radius - eps)

    def describe(self) -> str:
        c = ",".join(repr(float(x)) for x in self.center)
        return f"ball([{c}], {float(self.radius)!r})"


@dataclass(frozen=True)
class Box:
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        return np.all((pts > lo) & (pts < hi), axis=-1)

    def shrink(self, eps: float) -> "Box":
        lo = np.asarray(self.lo, float) + eps
        hi = np.asarray(self.hi, float) - eps
        if np.any(lo >= hi):
            raise RegionError(f"cannot shrink box by {eps}")
        return Box(tuple(lo), tuple(hi))

    @property
    def center(self):
        return tuple((np.asarray(self.lo, float) + np.asarray(self.hi, float)) / 2)

    def describe(self) -> str:
        lo = ",".join(repr(float(x)) for x in self.lo)
        hi = ",".join(repr(float(x)) for x in self.hi)
        return f"box([{lo}], [{hi}])"


Shape = Union[Ball, Box]


def union_contains(shapes, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, float))
    out = np.zeros(pts.shape[0], bool)
    for s in shapes:
        out |= s.contains(pts)
    return out


@dataclass(frozen=True)
class RegionSpec:
    """The vanishing set ``O``, the observation set ``omega`` and the margin ``kappa``.

    ``dist(omega, R^n \\ O) >= 2 kappa`` is required; :meth:`verify` checks it
    at grid nodes.
    """

    O: Tuple[Shape, ...]
    omega: Tuple[Shape, ...]
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "O", tuple(self.O))
        object.__setattr__(self, "omega", tuple(self.omega))
        if not 0 < self.kappa < 1:
            raise RegionError("kappa must lie in (0, 1)")
        if not self.O or not self.omega:
            raise RegionError("O and omega must be nonempty")

    def in_O(self, pts) -> np.ndarray:
        return union_contains(self.O, pts)

    def in_omega(self, pts) -> np.ndarray:
        return union_contains(self.omega, pts)

    def O_mask(self, grid: GridSpec) -> np.ndarray:
        return self.in_O(grid.points_array()).reshape(grid.shape)

    def omega_mask(self, grid: GridSpec) -> np.ndarray:
        return self.in_omega(grid.points_array()).reshape(grid.shape)

    def omega_points(self, grid: GridSpec) -> np.ndarray:
        pts = grid.points_array()
        sel = pts[self.in_omega(pts)]
        centers = np.array([np.asarray(s.center, float) for s in self.omega])
        return np.vstack([sel, centers]) if sel.size else centers

    def margin(self, grid: GridSpec) -> float:
        """Smallest distance from omega sample points to nodes outside ``O``."""
        pts = grid.points_array()
        outside = pts[~self.in_O(pts)]
        if outside.size == 0:
            return np.inf
        tree = cKDTree(outside, boxsize=None)
        d, _ = tree.query(self.omega_points(grid))
        return float(np.min(d))

    def verify(self, grid: GridSpec) -> float:
        m = self.margin(grid)
        if m < 2 * self.kappa:
            raise RegionError(f"omega is only {m:.4g} from the complement of O; need 2*kappa = {2 * self.kappa}")
        return m

    def shrink(self, eps: float) -> "RegionSpec":
        """Region with ``O`` replaced by the set of points more than ``eps`` inside it."""
        return RegionSpec(tuple(s.shrink(eps) for s in self.O), self.omega, self.kappa)

    def describe(self) -> dict:
        return {
            "O": [s.describe() for s in self.O],
            "omega": [s.describe() for s in self.omega],
            "kappa": self.kappa,
        }
