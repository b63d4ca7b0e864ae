"""Super-exponential decay fits and spectral mollification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .analytic import _bump_profile
from .grid import DecayCertificate, Field, GridSpec, _apply_symbol

RMS_THRESHOLD = 0.5
GAMMA_MARGIN = 0.05  # fitted gamma must exceed 1 by this much


class MarginError(ValueError):
    pass


@dataclass
class DecayFit:
    ok: bool
    certificate: Optional[DecayCertificate]
    gamma: float = float("nan")
    rho: float = float("nan")
    log_C: float = float("nan")
    rms: float = float("nan")
    shells: List[tuple] = field(default_factory=list)
    reason: str = ""


def _shell_envelopes(u: Field, n_shells: int):
    g = u.grid
    r = g.radius()
    a = np.abs(u.values)
    edges = np.linspace(g.half_width / 2, g.half_width, n_shells + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        if sel.any():
            k = np.argmax(np.where(sel, a, -1.0))
            out.append((float(r.flat[k]), float(a.flat[k])))
    return out


def fit_super_exp_decay(u: Field, n_shells: int = 12, noise: float = 100 * np.finfo(float).eps) -> DecayFit:
    """Fit ``log max_shell |u| ~ log C - rho r^gamma`` over shells with ``|x| >= L/2``.

    Success needs ``gamma > 1`` (plus a small margin), ``rho > 0``, at least
    three usable shells and an RMS log misfit below 0.5.  ``log C`` is raised
    by the largest positive residual so the envelope bounds every shell.
    Shells below ``noise * max|u|`` count as zero.
    """
    peak = u.max_abs()
    if peak == 0:
        raise ValueError("cannot fit the decay of the zero field")
    shells = _shell_envelopes(u, n_shells)
    floor = noise * peak
    usable = [(r, e) for r, e in shells if e > floor]
    if not usable:
        cert = DecayCertificate(peak, 1.0, 2.0, zero_tail=True)
        return DecayFit(True, cert, shells=shells, reason="numerically zero tail")
    if len(usable) < 3:
        return DecayFit(False, None, shells=shells, reason=f"only {len(usable)} shells above the noise floor")
    r = np.array([s[0] for s in usable])
    y = np.log(np.array([s[1] for s in usable]))

    def solve(gamma):
        A = np.column_stack([np.ones_like(r), -(r ** gamma)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = y - A @ coef
        return coef, res

    def rms(gamma):
        return float(np.sqrt(np.mean(solve(gamma)[1] ** 2)))

    opt = minimize_scalar(rms, bounds=(0.25, 4.0), method="bounded", options={"xatol": 1e-6})
    gamma = float(opt.x)
    (logC, rho), res = solve(gamma)
    err = rms(gamma)
    fit = DecayFit(False, None, gamma, float(rho), float(logC), err, shells)
    if err >= RMS_THRESHOLD:
        fit.reason = f"log-space misfit {err:.3g} exceeds {RMS_THRESHOLD}"
    elif rho <= 0:
        fit.reason = "fitted rate is not positive"
    elif gamma <= 1 + GAMMA_MARGIN:
        fit.reason = f"fitted gamma {gamma:.3f} is not above 1"
    else:
        fit.ok = True
        fit.certificate = DecayCertificate(float(np.exp(logC + max(res.max(), 0.0))), float(rho), gamma, residual=err)
    return fit


def mollifier_kernel(grid: GridSpec, eps: float) -> np.ndarray:
    """Bump ``psi_eps`` sampled at the nodes with origin at index 0 and unit discrete mass."""
    r = grid.radius()
    psi = _bump_profile(r / eps)
    if psi.sum() == 0:
        psi = (r == r.min()).astype(float)
    psi = np.fft.ifftshift(psi)
    return psi / (psi.sum() * grid.cell_volume)


def mollifier_symbol(grid: GridSpec, eps: float) -> np.ndarray:
    """Discrete Fourier multiplier of convolution with ``psi_eps``."""
    axes = tuple(range(grid.dim))
    return np.fft.fftn(mollifier_kernel(grid, eps), axes=axes).real * grid.cell_volume


def mollify(u: Field, eps: float, eps0: float) -> Field:
    """Spectral convolution ``u * psi_eps`` (supp psi in the unit ball, mass 1).

    ``eps0`` is the admissible margin; ``eps >= eps0`` raises :class:`MarginError`.
    """
    if not eps > 0:
        raise MarginError("eps must be positive")
    if eps >= eps0:
        raise MarginError(f"eps = {eps} is not below the margin eps0 = {eps0}")
    sym = mollifier_symbol(u.grid, eps)
    dec = u.decay
    if dec is not None and not dec.zero_tail:
        # (r - eps)^g >= 2^{1-g} r^g - eps^g
        dec = DecayCertificate(dec.C * np.exp(dec.rho * eps ** dec.gamma), dec.rho * 2 ** (1 - dec.gamma), dec.gamma)
    return _apply_symbol(u, sym, decay=dec)
