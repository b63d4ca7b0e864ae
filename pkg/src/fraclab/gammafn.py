"""Complex log-Gamma (Lanczos) and Gamma residues."""
from __future__ import annotations

import math

import numpy as np

# Lanczos g = 7, nine-term coefficient set
_G = 7.0
_P = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


class PoleError(ArithmeticError):
    pass


def _lanczos(z):
    """log Gamma(z) for Re z >= 1/2 (principal branch)."""
    zm = z - 1.0
    a = np.full_like(zm, _P[0])
    for k in range(1, len(_P)):
        a = a + _P[k] / (zm + k)
    t = zm + _G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(a)


def log_gamma(z):
    """Principal branch of ``log Gamma(z)`` (cut along the negative real axis).

    For ``Re z < 1/2`` the argument is shifted up by the recurrence
    ``log Gamma(z) = log Gamma(z + N) - sum_k Log(z + k)``; each ``Log(z + k)``
    is cut only on the negative real axis, so the result is the continuous
    branch that is real for real positive ``z``.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    bad = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if bad.any():
        raise PoleError(f"Gamma has a pole at {z[bad][0].real:g}")
    shift = np.where(z.real < 0.5, np.ceil(0.5 - z.real), 0.0).astype(int)
    out = _lanczos(z + shift)
    for k in range(int(shift.max(initial=0))):
        sel = shift > k
        out[sel] -= np.log(z[sel] + k)
    return out[0] if scalar else out


def gamma(z):
    return np.exp(log_gamma(z))


def rgamma(z):
    """``1/Gamma(z)``, zero at the poles."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, complex)
    pole = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    out[~pole] = np.exp(-log_gamma(z[~pole]))
    return out if out.ndim else complex(out)


def gamma_residue(ell: int) -> float:
    """Residue of Gamma at ``-ell``: ``(-1)^ell / ell!``."""
    ell = int(ell)
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return (-1.0) ** ell / math.factorial(ell)


def gamma_ratio(m: int, alpha: float) -> float:
    """``Gamma(m + 1 + alpha) / Gamma(1 + alpha) = (1+alpha)(2+alpha)...(m+alpha)``."""
    return float(np.prod([k + alpha for k in range(1, m + 1)]))
