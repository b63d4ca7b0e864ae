"""Exponent collections ``{(s_k, b_k)}`` and the separation hypothesis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple


class ExponentError(ValueError):
    pass


class HypothesisViolation(ExponentError):
    def __init__(self, report):
        super().__init__(f"exponent separation violated: {report.violations}")
        self.report = report


_INT_TOL = 1e-10


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) <= _INT_TOL


@dataclass(frozen=True)
class ExponentConfig:
    """Terms ``(s_k, b_k)`` stored with increasing ``s``."""

    terms: Tuple[Tuple[float, complex], ...]

    def __post_init__(self):
        if not self.terms:
            raise ExponentError("need at least one term")
        terms = sorted(((float(s), complex(b)) for s, b in self.terms), key=lambda t: t[0])
        for s, b in terms:
            if s <= 0:
                raise ExponentError(f"exponent {s} is not positive")
            if _is_integer(s):
                raise ExponentError(f"exponent {s} is an integer (zero fractional part)")
            if b == 0:
                raise ExponentError("coefficients must be nonzero")
        for (s1, _), (s2, _) in zip(terms, terms[1:]):
            if s1 == s2:
                raise ExponentError(f"repeated exponent {s1}")
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def of(cls, s: Sequence[float], b: Sequence[complex] | None = None) -> "ExponentConfig":
        b = [1.0] * len(s) if b is None else b
        return cls(tuple(zip(s, b)))

    @property
    def s(self) -> List[float]:
        return [t[0] for t in self.terms]

    @property
    def b(self) -> List[complex]:
        return [t[1] for t in self.terms]

    @property
    def floors(self) -> List[int]:
        return [math.floor(s) for s in self.s]

    @property
    def alphas(self) -> List[float]:
        return [s - math.floor(s) for s in self.s]

    def __len__(self):
        return len(self.terms)


@dataclass
class HypothesisReport:
    dim: int
    violations: List[Tuple[int, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> List[str]:
        if self.ok:
            return [f"separation hypothesis holds (n={self.dim})"]
        return [f"terms {j},{k}: {why}" for j, k, why in self.violations]


def validate_exponents(cfg: ExponentConfig, n: int) -> HypothesisReport:
    """Check ``s_k - s_j`` against Z (even ``n``) or Z/2 (odd ``n``).

    Pairs are reported with 0-based indices into the sorted term list.
    """
    rep = HypothesisReport(n)
    s = cfg.s
    for j in range(len(s)):
        for k in range(j + 1, len(s)):
            d = s[k] - s[j]
            if n % 2 == 0:
                if _is_integer(d):
                    rep.violations.append((j, k, f"s_k - s_j = {d:g} is an integer"))
            elif _is_integer(2 * d):
                rep.violations.append((j, k, f"s_k - s_j = {d:g} is a half-integer multiple"))
    return rep


def validate_alphas(alphas: Sequence[float], n: int) -> HypothesisReport:
    """Separation check on fractional parts alone (the smooth normal form)."""
    rep = HypothesisReport(n)
    for j in range(len(alphas)):
        for k in range(j + 1, len(alphas)):
            d = abs(alphas[k] - alphas[j])
            if d <= _INT_TOL:
                rep.violations.append((j, k, "coincident fractional parts"))
            elif n % 2 == 1 and abs(d - 0.5) <= _INT_TOL:
                rep.violations.append((j, k, "fractional parts differ by 1/2"))
    return rep
