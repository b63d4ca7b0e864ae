"""Command-line entry point: ``fraclab <subcommand> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import calderon, config as cfgmod, fz, pipeline, spherical
from .grid import Field, evaluate_points, frac_lap_fourier, set_threads, write_snapshot
from .heat import TimeQuadrature, frac_lap_heat, heat_evolve

log = logging.getLogger("fraclab")

SUBCOMMANDS = ("fraclap", "heat", "fz", "residues", "spherical", "entangle",
               "ip2-forward", "ip2-reconstruct", "symbol")


def fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def parse_complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


class Run:
    """Shared state for one subcommand: config, output directory and check list."""

    def __init__(self, args):
        self.args = args
        self.cfg = cfgmod.load_config(args.config)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.failures: List[str] = []
        self.lines: List[str] = []

    def tol(self, default: float, section: str = "pipeline") -> float:
        if self.args.tol_override is not None:
            return self.args.tol_override
        return self.cfg.get(section, "tol", default)

    def check(self, ok: bool, label: str):
        if not ok:
            self.failures.append(label)

    def say(self, line: str):
        self.lines.append(line)

    def finish(self) -> int:
        for line in self.lines:
            print(line)
        if self.failures:
            print("failing checks:")
            for f in self.failures:
                print(f"  {f}")
            return 1
        print("all checks passed")
        return 0


def _points(run: Run, grid, region=None) -> np.ndarray:
    pts = run.cfg.get("pipeline", "samples")
    if pts is not None:
        return np.atleast_2d(np.asarray(pts, float))
    x = run.cfg.get("pipeline", "x")
    if x is not None:
        return np.atleast_2d(np.asarray(x, float))
    if region is not None:
        return pipeline.default_omega_samples(region, grid)
    return np.zeros((1, grid.dim))


def _scenario(run: Run) -> fz.FScenario:
    """Fields with weights folded in; mollified and reduced when ``[fields] eps`` is set."""
    grid = cfgmod.build_grid(run.cfg)
    region = cfgmod.build_region(run.cfg)
    raw = cfgmod.build_fields(run.cfg, grid)
    ecfg = cfgmod.build_exponents(run.cfg)
    x = _points(run, grid, region)[0]
    eps = run.cfg.get("fields", "eps")
    if eps is not None:
        return pipeline.reduce_to_smooth(raw, ecfg, region, eps, x=x)
    if len(raw) != len(ecfg.terms):
        raise cfgmod.ConfigError("[fields] v needs one descriptor per exponent")
    fields = [u * b for u, b in zip(raw, ecfg.b)]
    return fz.FScenario(fields, list(ecfg.alphas), region, x)


# --------------------------------------------------------------------------


def cmd_fraclap(run: Run) -> int:
    grid = cfgmod.build_grid(run.cfg)
    u = cfgmod.build_fields(run.cfg, grid)[0]
    ss = run.cfg.get("pipeline", "s") or run.cfg.get("exponents", "s") or [0.5]
    tol = run.tol(1e-5)
    rows = []
    for s in ss:
        ref = frac_lap_fourier(u, s)
        for x in _points(run, grid):
            h = frac_lap_heat(u, s, x).value
            f = complex(evaluate_points(ref, x[None])[0])
            rel = abs(h - f) / max(abs(f), 1e-300)
            rows.append([s, *x, f.real, f.imag, h.real, h.imag, rel])
            run.check(rel <= tol, f"s={s} x={list(x)}: relative error {rel:.3e} > {tol}")
    write_csv(run.out / "fraclap.csv", ["s"] + [f"x{i + 1}" for i in range(grid.dim)]
              + ["fourier_re", "fourier_im", "heat_re", "heat_im", "rel_err"], rows)
    run.say(f"fraclap: {len(rows)} evaluations, max relative error {max(r[-1] for r in rows):.3e}")
    return run.finish()


def cmd_heat(run: Run) -> int:
    grid = cfgmod.build_grid(run.cfg)
    u = cfgmod.build_fields(run.cfg, grid)[0]
    ts = run.cfg.get("pipeline", "t") or [0.1, 0.5]
    tol = run.tol(1e-10)
    rows = []
    for t1 in ts:
        for t2 in ts:
            a = heat_evolve(heat_evolve(u, t1), t2)
            b = heat_evolve(u, t1 + t2)
            rel = (a - b).max_abs() / max(b.max_abs(), 1e-300)
            rows.append([t1, t2, rel])
            run.check(rel <= tol, f"composition t1={t1} t2={t2}: {rel:.3e} > {tol}")
    cal = TimeQuadrature().calibrate()
    run.check(cal.error <= 1e-8, f"time quadrature calibration error {cal.error:.3e}")
    write_csv(run.out / "heat.csv", ["t1", "t2", "rel_err"], rows)
    run.say(f"heat: composition max error {max(r[-1] for r in rows):.3e}, quadrature calibration {cal.error:.3e}")
    return run.finish()


def cmd_fz(run: Run) -> int:
    sc = _scenario(run)
    z = parse_complex(run.args.z)
    tol = run.tol(1e-4)
    try:
        mero = fz.F_mero(z, sc)
    except fz.PoleProximityError as exc:
        run.check(False, str(exc))
        return run.finish()
    row = [z.real, z.imag, mero.real, mero.imag]
    run.say(f"F({run.args.z}) = {fmt(mero.real)} {'+' if mero.imag >= 0 else '-'} {fmt(abs(mero.imag))}i  (meromorphic form)")
    if z.real >= 0:
        right = fz.F_right(z, sc).value
        rel = abs(right - mero) / max(abs(mero), 1e-300)
        row += [right.real, right.imag, rel]
        run.say(f"heat-semigroup form agrees to {rel:.3e}")
        run.check(rel <= tol, f"F_right vs F_mero: {rel:.3e} > {tol}")
    else:
        row += ["", "", ""]
    write_csv(run.out / "fz.csv", ["z_re", "z_im", "mero_re", "mero_im", "right_re", "right_im", "rel_diff"], [row])
    return run.finish()


def cmd_residues(run: Run) -> int:
    sc = _scenario(run)
    mmax = run.cfg.get("pipeline", "m_residue", 2)
    tol = run.tol(1e-4)
    rows = []
    for k in range(len(sc.alphas)):
        for m in range(mmax + 1):
            r = fz.residue_moment(sc, k, m, strict=False)
            d = fz.moment_direct(sc.fields[k], sc.x, r.power, sc.region).value
            rel = abs(r.moment - d) / max(abs(d), 1e-300)
            rows.append([k, m, r.power, r.pole.real, r.moment.real, r.moment.imag, d.real, d.imag, rel])
            run.check(rel <= tol and r.ladder.converged and not r.mixed, f"term {k} m={m}: relative error {rel:.3e}")
    write_csv(run.out / "residues.csv", ["term", "m", "power", "pole", "residue_re", "residue_im",
                                         "direct_re", "direct_im", "rel_err"], rows)
    run.say(f"residues: {len(rows)} moments, max relative error {max(r[-1] for r in rows):.3e}")
    return run.finish()


def cmd_spherical(run: Run) -> int:
    sc = _scenario(run)
    pts = pipeline.default_omega_samples(sc.region, sc.grid) if run.cfg.get("pipeline", "samples") is None \
        else _points(run, sc.grid)
    rows, vrows = [], []
    x = pts[0]
    tmax = sc.grid.half_width - float(np.max(np.abs(x)))
    dt = sc.grid.spacing / 2
    ts = dt * np.arange(1, int(tmax / dt))
    for k, v in enumerate(sc.fields):
        if v.decay is None:
            v = v.with_values(v.values, decay=spherical.box_certificate(v))
        sm = spherical.spherical_means(v, x, ts)
        rows.extend([k, t, s.real, s.imag] for t, s in zip(ts, sm))
        verdict = spherical.support_decision(v, sc.region, pts, delta=run.cfg.get("pipeline", "support_delta", 1e-12))
        vrows.append([k, verdict.label, verdict.max_mean, verdict.threshold])
        run.say(f"term {k}: {verdict.label} (max |SM| {verdict.max_mean:.3e}, threshold {verdict.threshold:.3e})")
    write_csv(run.out / "spherical_means.csv", ["term", "t", "sm_re", "sm_im"], rows)
    write_csv(run.out / "verdicts.csv", ["term", "verdict", "max_mean", "threshold"], vrows)
    return run.finish()


def cmd_entangle(run: Run) -> int:
    sc = _scenario(run)
    samples = run.cfg.get("pipeline", "samples")
    rep = pipeline.run_pipeline(sc, M_max=run.cfg.get("pipeline", "M_max", 6), omega_samples=samples,
                                m_residue=run.cfg.get("pipeline", "m_residue", 4),
                                delta=run.cfg.get("pipeline", "delta"),
                                support_delta=run.cfg.get("pipeline", "support_delta", 1e-12))
    t1 = rep.step1
    write_csv(run.out / "step1.csv", ["m", "F_re", "F_im", "bound"],
              [[m, v.real, v.imag, b] for m, v, b in zip(t1.m, t1.values, t1.bounds)
               if v != 0 or not rep.step1_ok])
    write_csv(run.out / "step2.csv", ["term", *[f"x{i + 1}" for i in range(sc.dim)], "m", "power", "residue_re",
                                      "residue_im", "direct_re", "direct_im", "tol", "passed"],
              [[c.term, *map(float, c.x), c.m, c.power, c.residue.real, c.residue.imag, c.direct.real,
                c.direct.imag, c.tol, int(c.passed)] for c in rep.step2])
    write_csv(run.out / "step3.csv", ["term", "verdict", "max_mean", "threshold"],
              [[k, lab, v.max_mean, v.threshold] for k, (v, lab) in enumerate(zip(rep.step3, rep.verdicts()))])
    summary = rep.render()
    (run.out / "summary.txt").write_text(summary + "\n")
    run.say(summary)
    run.check(rep.step1_ok, "step I: F(m) exceeds its bound")
    run.check(rep.step2_ok, "step II: residue and direct moments disagree")
    return run.finish()


def _ip2_dictionaries(run: Run, geo):
    ns = run.cfg.get("ip2", "n_sources", 16)
    nr = run.cfg.get("ip2", "n_receivers", 16)
    return calderon.gaussian_dictionary(geo, ns), calderon.gaussian_dictionary(geo, nr, where="w2")


def cmd_ip2_forward(run: Run) -> int:
    grid = cfgmod.build_grid(run.cfg)
    geo, q = cfgmod.build_ip2(run.cfg, grid)
    prob = geo.with_q(q)
    src, rec = _ip2_dictionaries(run, geo)
    D = calderon.dn_matrix(prob, src, rec)
    write_csv(run.out / "dn.csv", ["i", "j", "re", "im"], D.rows())
    write_snapshot(run.out / "q.frl", Field(grid, np.where(geo.omega_mask, q, 0).astype(complex)))
    a = calderon.dn_pairing(prob, src[0], src[-1])
    b = calderon.dn_pairing(prob, src[-1], src[0])
    sym = abs(a - b) / max(abs(a), abs(b), 1e-300)
    run.say(f"ip2-forward: {len(src)} x {len(rec)} DN matrix, symmetry residual {sym:.3e}")
    tol = run.args.tol_override if run.args.tol_override is not None else 1e-9
    run.check(sym <= tol, f"DN symmetry residual {sym:.3e} > {tol}")
    return run.finish()


def read_dn_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    ni = max(int(r["i"]) for r in rows) + 1
    nj = max(int(r["j"]) for r in rows) + 1
    D = np.zeros((ni, nj), complex)
    for r in rows:
        D[int(r["i"]), int(r["j"])] = float(r["re"]) + 1j * float(r["im"])
    return D


def cmd_ip2_reconstruct(run: Run) -> int:
    grid = cfgmod.build_grid(run.cfg)
    geo, q = cfgmod.build_ip2(run.cfg, grid)
    src, rec = _ip2_dictionaries(run, geo)
    if run.args.data:
        entries = read_dn_csv(run.args.data)
        data = calderon.DNMatrix(src, rec, entries, grid)
    else:
        data = calderon.dn_matrix(geo.with_q(q), src, rec)
    t0 = time.time()
    R = calderon.reconstruct_q(data, geo, eta=run.cfg.get("ip2", "eta", 0.25))
    qt = q[geo.omega_mask]
    err = float(np.linalg.norm(R.q - qt) / max(np.linalg.norm(qt), 1e-300))
    pts = grid.points_array()[geo.omega_mask.ravel()]
    write_csv(run.out / "q_estimate.csv", [f"x{i + 1}" for i in range(grid.dim)] + ["q_re", "q_im", "masked"],
              [[*map(float, p), v.real, v.imag, int(not g)] for p, v, g in zip(pts, R.q, R.mask)])
    write_snapshot(run.out / "q_estimate.frl", R.as_field(geo))
    tol = run.tol(0.1, "ip2")
    run.say(f"ip2-reconstruct: relative L2 error {err:.3e} (tolerance {tol}), basis size {R.basis_size}, "
            f"data residual {R.data_residual:.2e}, Runge error {R.runge_error:.3e}, masked cells {R.masked_cells}, "
            f"{time.time() - t0:.1f} s")
    run.check(err <= tol, f"reconstruction error {err:.3e} > {tol}")
    return run.finish()


def cmd_symbol(run: Run) -> int:
    grid = cfgmod.build_grid(run.cfg)
    A = np.asarray(run.cfg.require("symbol", "matrix"), float)
    x0 = run.cfg.get("symbol", "x0", [0.0] * grid.dim)
    lams = run.cfg.get("symbol", "lambdas", [8.0, 16.0, 32.0])
    xi = run.cfg.get("symbol", "xi")
    rows = []
    if xi is not None:
        xi = np.asarray(xi, float)
        res = calderon.aniso_symbol_extract(A, x0, xi, lams, grid)
        est = res["estimate"]
        rows.extend(["ladder", lam, v.real, v.imag] for lam, v in zip(res["lambdas"], res["ladder"]))
        rows.append(["estimate", "", est.real, est.imag])
        run.say(f"quadratic form estimate {fmt(est.real)}")
        exp = run.cfg.get("symbol", "expected")
        if exp is not None:
            rel = abs(est - exp) / max(abs(exp), 1e-300)
            run.check(rel <= run.tol(0.02, "symbol"), f"symbol estimate off by {rel:.3e}")
    P = calderon.polarize(A, x0, lams, grid).real
    for i in range(P.shape[0]):
        for j in range(P.shape[1]):
            rows.append([f"A{i + 1}{j + 1}", "", P[i, j], 0.0])
    run.say("polarized matrix: " + np.array2string(P, precision=6))
    write_csv(run.out / "symbol.csv", ["entry", "lambda", "re", "im"], rows)
    return run.finish()


COMMANDS = {
    "fraclap": cmd_fraclap, "heat": cmd_heat, "fz": cmd_fz, "residues": cmd_residues,
    "spherical": cmd_spherical, "entangle": cmd_entangle, "ip2-forward": cmd_ip2_forward,
    "ip2-reconstruct": cmd_ip2_reconstruct, "symbol": cmd_symbol,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tol-override", type=float, default=None, help="replace the pass/fail tolerance")
    common.add_argument("--threads", type=int, default=None, help="worker threads (env FRACLAB_THREADS)")
    common.add_argument("--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="fraclab", description="Fractional Laplacian laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "fz":
            sp.add_argument("--z", required=True, help="complex point, e.g. 1+0i")
        if name == "ip2-reconstruct":
            sp.add_argument("--data", default=None, help="DN matrix CSV written by ip2-forward")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None and os.environ.get("FRACLAB_THREADS"):
        threads = int(os.environ["FRACLAB_THREADS"])
    try:
        run = Run(args)
        if threads:
            set_threads(threads)
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                return COMMANDS[args.command](run)
        return COMMANDS[args.command](run)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
