"""Command-line driver: goursat {evolve,constraints,kirchhoff,norms,convergence,checks}."""
import argparse
import csv
import json
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from . import catalog, einstein, evolution, kirchhoff, norms, nullconstraints, plotting
from .config import RunConfig, as_dict, parse_config
from .errors import ConfigError, DataError, GoursatError
from .expr import Expression
from .geometry import WedgeSpec, build_wedge_grid, characteristic_residual, restrict_to_null
from .system import (GoursatData, check_G0_linearity, check_G1_linearity, null_condition_check,
                     verify_signature)


# --- builders ----------------------------------------------------------------

def build_grid(cfg, h=None):
    spec = WedgeSpec(T_max=cfg.T, sigma=cfg.sigma, B_bounds=cfg.B_bounds, h_null=h or cfg.h,
                     h_trans=cfg.h_trans, periodic=cfg.periodic)
    return build_wedge_grid(spec)


def build_system(cfg):
    src = Expression(cfg.source) if cfg.source else None
    if cfg.system == "linear_wave":
        return catalog.linear_wave(src)
    if cfg.system == "semilinear_cubic":
        return catalog.semilinear_cubic(src, coupling=cfg.coupling)
    if cfg.system == "quasilinear_demo":
        return catalog.quasilinear_demo(cfg.eps, src)
    return einstein.einstein_reduced_system()


def analytic_metric(cfg):
    if cfg.metric in ("minkowski", "conformal_flat"):
        return einstein.minkowski()
    if cfg.metric == "harmonic_gauge_wave":
        return einstein.harmonic_gauge_wave(eps=cfg.eps)
    if cfg.metric == "linearized_tt_wave":
        return einstein.linearized_tt_wave(eps=cfg.eps)
    return einstein.flrw_flat()


def _read_surface_file(path, grid):
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    shape = (grid.N + 1, len(grid.x2), len(grid.x3))
    if arr.shape[0] != np.prod(shape):
        raise DataError(f"{path}: expected {np.prod(shape)} rows (one per surface node), found {arr.shape[0]}")
    return arr.reshape(shape + (arr.shape[1],))


def build_data(cfg, grid):
    if cfg.system == "einstein_reduced_plane":
        if cfg.metric == "conformal_flat":
            shape = (grid.N + 1, len(grid.x2), len(grid.x3), 3)
            hI = np.zeros(shape)
            hI[..., 0] = hI[..., 2] = 1.0
            zero = np.zeros(shape[1:3])
            corner = nullconstraints.CornerData(np.ones(shape[1:3]), zero, zero, zero, zero, {1: hI, 2: hI})
            return nullconstraints.assemble_conformal_data(grid, corner)
        m = analytic_metric(cfg)
        return GoursatData.from_functions(grid, m.sample_vec, m.sample_vec)
    phi = {}
    for w, text, path in ((1, cfg.data1, cfg.data1_file), (2, cfg.data2, cfg.data2_file)):
        if path:
            phi[w] = _read_surface_file(path, grid)
        else:
            X = grid.surface_spacetime_coords(w)
            phi[w] = Expression(text)(X)[..., None]
    return GoursatData(grid, phi)


def exact_field(cfg, grid):
    """Reference solution on the wedge nodes, or None."""
    if cfg.system == "einstein_reduced_plane":
        return analytic_metric(cfg).sample_vec(grid.coords())
    if cfg.exact:
        return Expression(cfg.exact)(grid.coords())[..., None]
    return None


# --- output ------------------------------------------------------------------

class Report:
    def __init__(self, out, cfg, command):
        self.out = out
        self.cfg = cfg
        self.command = command
        os.makedirs(out, exist_ok=True)
        self.meta = {"command": command, "config": as_dict(cfg), "files": [], "results": {},
                     "versions": {"goursat": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                                  "python": platform.python_version()},
                     "timings": {}}
        self.t0 = time.perf_counter()

    def path(self, name):
        return os.path.join(self.out, name)

    def table(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for r in rows:
                wr.writerow([_fmt(v) for v in r])
        self.meta["files"].append(name)

    def figure(self, fn, name, *args, **kw):
        if self.cfg.plots:
            fn(*args, path=self.path(name), **kw)
            self.meta["files"].append(name)

    def finish(self, status=0, error=None):
        self.meta["status"] = status
        if error:
            self.meta["error"] = error
        self.meta["timings"]["total"] = time.perf_counter() - self.t0
        with open(self.path("metadata.json"), "w") as fh:
            json.dump(self.meta, fh, indent=2, default=_json_default)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def grid_meta(grid):
    return {"h": grid.h, "N": grid.N, "h_trans": grid.spec.h_trans, "n2": len(grid.x2), "n3": len(grid.x3),
            "T": grid.spec.T_max, "sigma": grid.spec.sigma, "B": grid.spec.B_bounds, "periodic": grid.periodic,
            "nodes": int(grid.mask.sum()) * len(grid.x2) * len(grid.x3)}


def field_rows(grid, U):
    X = grid.coords()
    for ia, ib in np.argwhere(grid.mask):
        for i2 in range(len(grid.x2)):
            for i3 in range(len(grid.x3)):
                yield [int(ia), int(ib), i2, i3, *X[ia, ib, i2, i3], *U[ia, ib, i2, i3]]


def field_header(n):
    return ["ia", "ib", "i2", "i3", "x0", "x1", "x2", "x3"] + [f"u{r}" for r in range(n)]


# --- commands ----------------------------------------------------------------

def cmd_evolve(cfg, rep):
    grid = build_grid(cfg)
    rep.meta["grid"] = grid_meta(grid)
    sys_ = build_system(cfg)
    data = build_data(cfg, grid)
    ckpt = rep.path("checkpoint.npz") if cfg.checkpoint_every else None
    res = evolution.evolve(sys_, data, checkpoint=ckpt, checkpoint_every=cfg.checkpoint_every,
                           tol=cfg.tol, max_sweeps=cfg.max_sweeps)
    rep.meta["timings"].update(res.timings)
    U = res.u
    rep.table("field.csv", field_header(U.shape[-1]), field_rows(grid, U))
    diag = res.state.diagnostics
    rep.table("fronts.csv", ["front", "t", "cells", "sweeps", "last_update", "max_u"],
              ([d["front"], d["t"], d["cells"], d["sweeps"], d["last_update"], d["max_u"]] for d in diag))
    interior = interior_mask(grid)
    rmax = float(np.nanmax(np.abs(res.residual[interior]))) if interior.any() else 0.0
    rep.meta["results"]["max_interior_residual"] = rmax
    ex = exact_field(cfg, grid)
    if ex is not None:
        rep.meta["results"]["max_error"] = float(np.nanmax(np.abs(U - ex)))
    rep.figure(plotting.field_map, "field.png", grid, U, title=f"{sys_.name}: component 0")
    if res.gauge_trace is not None:
        tau = 0.5 * grid.h * np.arange(grid.N + 1)
        rep.table("gauge.csv", ["t", "max_abs_gauge"], zip(tau, res.gauge_trace))
        tr = res.energy_trace
        rep.table("energy.csv", ["t", "E"], zip(tr.times, tr.E))
        verdict = einstein.gronwall_check(tr)
        rep.meta["results"].update({"gronwall_passed": verdict.passed, "gronwall_c": verdict.c_measured,
                                    "max_gauge_final": float(res.gauge_trace[-1])})
        rep.figure(plotting.trace_plot, "gauge.png", tau, {"max |Gamma|": res.gauge_trace}, ylabel="gauge drift")
        rep.figure(plotting.trace_plot, "energy.png", tr.times, {"E": tr.E}, ylabel="energy")
    return 0


def interior_mask(grid):
    """Interior nodes: two nodes away from S and from the masked boundary."""
    m = grid.mask.copy()
    m[:2, :] = False
    m[:, :2] = False
    ia, ib = np.nonzero(m)
    for da, db in ((1, 0), (0, 1), (2, 0), (0, 2)):
        ok = (ia + da <= grid.N) & (ib + db <= grid.N)
        ok[ok] = grid.mask[ia[ok] + da, ib[ok] + db]
        m[ia[~ok], ib[~ok]] = False
    return m


def cmd_convergence(cfg, rep):
    sys_ = build_system(cfg)
    rows, hs, errs = [], [], []
    fields_ = []
    for k in range(cfg.levels):
        h = cfg.h / 2**k
        grid = build_grid(cfg, h)
        res = evolution.evolve(sys_, build_data(cfg, grid), tol=cfg.tol, max_sweeps=cfg.max_sweeps)
        ex = exact_field(cfg, grid)
        fields_.append(res.u)
        if ex is not None:
            err = float(np.nanmax(np.abs(res.u - ex)))
        else:
            err = np.nan
        hs.append(h)
        errs.append(err)
    if all(np.isnan(errs)):
        # self-convergence: differences between successive levels on shared nodes
        errs = [float(np.nanmax(np.abs(fields_[k][::1] - fields_[k + 1][::2, ::2])))
                for k in range(len(fields_) - 1)] + [np.nan]
        rep.meta["results"]["mode"] = "self-convergence"
    else:
        rep.meta["results"]["mode"] = "exact"
    orders = [np.nan] + [float(np.log2(errs[k - 1] / errs[k])) if errs[k] > 0 and errs[k - 1] > 0 else np.nan
                         for k in range(1, len(errs))]
    for h, e, p in zip(hs, errs, orders):
        rows.append([h, e, p])
    rep.table("convergence.csv", ["h", "max_error", "observed_order"], rows)
    rep.meta["results"]["orders"] = orders
    rep.figure(plotting.convergence_plot, "convergence.png", hs, errs)
    return 0


def cmd_constraints(cfg, rep):
    if cfg.system != "einstein_reduced_plane":
        raise ConfigError("constraints needs system = einstein_reduced_plane")
    grid = build_grid(cfg)
    rep.meta["grid"] = grid_meta(grid)
    data = build_data(cfg, grid)
    comp = nullconstraints.corner_compatibility(data)
    rep.meta["results"]["corner_compatible"] = comp.passed
    rep.meta["results"]["corner_mismatch"] = comp.phi_mismatch
    m = analytic_metric(cfg)
    rows = []
    for w in (1, 2):
        X = grid.surface_spacetime_coords(w)
        g_s = einstein.sym_from_vec(data.phi[w])
        if cfg.metric == "conformal_flat":
            Kab = data.corner["K_ab"]
            K0 = np.zeros(g_s.shape[1:])
            K0[..., 2, 2] = Kab[..., 0]
            K0[..., 2, 3] = K0[..., 3, 2] = Kab[..., 1]
            K0[..., 3, 3] = Kab[..., 2]
            # flat data with Omega_0 = 0: the transverse derivative vanishes
            K_exact = np.zeros_like(g_s)
        else:
            K_exact = m.dg(X)[..., 0]
            K0 = K_exact[0]
        st = nullconstraints.solve_transport(grid, g_s, K0, w)
        for j, s in enumerate(st.s):
            rows.append([w, s, float(np.abs(st.K[j]).max()), float(np.abs(st.K[j] - K_exact[j]).max())])
        rep.meta["results"][f"max_K_error_S{w}"] = float(np.abs(st.K - K_exact).max())
    rep.table("transport.csv", ["w", "s", "max_abs_K", "max_abs_K_error"], rows)
    return 0


def _flat_semilinear(cfg):
    if cfg.system not in ("linear_wave", "semilinear_cubic"):
        raise ConfigError("kirchhoff needs a flat semilinear system (linear_wave or semilinear_cubic)")
    return build_system(cfg)


def cmd_kirchhoff(cfg, rep):
    sys_ = _flat_semilinear(cfg)
    grid = build_grid(cfg)
    rep.meta["grid"] = grid_meta(grid)
    data = build_data(cfg, grid)
    data.require_corner_compatible()
    q = kirchhoff.Quadrature(cfg.quad_mu, cfg.quad_phi, cfg.quad_lam, cfg.quad_theta)
    u, tr = kirchhoff.picard_iterate(grid, data, sys_, tol=cfg.picard_tol, max_iter=cfg.picard_max_iter,
                                     l=cfg.ball_radius or None, q=q)
    rep.table("picard.csv", ["k", "d_k", "ratio"],
              ([k + 1, d, tr.ratios[k - 1] if k >= 1 else np.nan] for k, d in enumerate(tr.d)))
    rep.table("field.csv", field_header(u.shape[-1]), field_rows(grid, u))
    qerr = kirchhoff.quadrature_error(grid, data, sys_, u, q)
    rep.meta["results"].update({"verdict": tr.verdict, "ball_radius": tr.ball_radius, "ball_ok": tr.ball_ok,
                                "quadrature_error": qerr})
    ex = exact_field(cfg, grid)
    if ex is not None:
        rep.meta["results"]["max_error"] = float(np.nanmax(np.abs(u - ex)))
    rep.figure(plotting.ratio_plot, "picard.png", tr.d)
    rep.figure(plotting.field_map, "field.png", grid, u, title="cone-integral solution")
    return 4 if tr.verdict == "diverged" else 0


def cmd_norms(cfg, rep):
    grid = build_grid(cfg)
    rep.meta["grid"] = grid_meta(grid)
    v = Expression(cfg.norm_field)(grid.coords())
    t = cfg.norm_t or cfg.T
    p = cfg.norm_p
    res = norms.script_norms(grid, v, p, t, start_k=cfg.start_k)
    rows = list(res.rows())
    for w in (1, 2):
        ns = norms.null_surface_norms(grid, restrict_to_null(v, w), p, w, t)
        rows.append((f"H(S{w}_t)", ns["H"]))
        rows.append((f"E(S{w}_t)", ns["E"]))
    rep.table("norms.csv", ["norm", "value"], rows)
    rep.meta["results"]["notes"] = res.notes
    rep.meta["results"]["p"] = p
    rep.meta["results"]["t"] = t
    rep.figure(plotting.bar_plot, "norms.png", [r[0] for r in rows], [r[1] for r in rows])
    return 0


def cmd_checks(cfg, rep):
    sys_ = build_system(cfg)
    grid = build_grid(cfg)
    data = build_data(cfg, grid)
    rows = []
    n = sys_.n
    box_x = ([0.0, -cfg.T, cfg.B[0], cfg.B[2]], [cfg.T, cfg.T, cfg.B[1], cfg.B[3]])
    ref = np.asarray(sys_.ref_u, dtype=float)
    box_u = (ref - 0.1, ref + 0.1)
    g0 = check_G0_linearity(sys_, box_x, box_u, seed=cfg.seed)
    rows.append(["G0_affine_coefficients", g0.passed, g0.max_second_difference])
    box_y = ([0.0, cfg.B[0], cfg.B[2]], [cfg.T, cfg.B[1], cfg.B[3]])
    box_du = (-np.ones(4 * n), np.ones(4 * n))
    for w in (1, 2):
        g1 = check_G1_linearity(sys_, w, box_y, box_u, box_du, seed=cfg.seed)
        rows.append([f"G1_linear_in_K_S{w}", g1.passed, g1.max_second_difference])
    x_ref = np.asarray(sys_.ref_x, dtype=float)
    sig = verify_signature(sys_.coefficients(x_ref, ref))
    rows.append(["signature_at_reference", sig.ok, sig.a00])
    if n == 1:
        # Hessian of f in du at the reference state, as a quadratic form
        eps = 1e-3
        H = np.zeros((4, 4))
        base = np.zeros((1, 4))
        for i in range(4):
            for j in range(4):
                def fval(di, dj):
                    d = base.copy()
                    d[0, i] += di
                    d[0, j] += dj
                    return float(sys_.source(x_ref, ref, d)[0])
                H[i, j] = (fval(eps, eps) - fval(eps, -eps) - fval(-eps, eps) + fval(-eps, -eps)) / (4 * eps**2)
        nv = null_condition_check(0.5 * H, tol=1e-6)
        rows.append(["null_condition_quadratic_part", nv.ok, nv.max_abs])
    for w in (1, 2):
        r = characteristic_residual(sys_, data.phi[w], grid, w)
        val = float(np.abs(r).max())
        rows.append([f"characteristic_S{w}", val <= 1e-12, val])
    rows.append(["corner_compatibility", data.corner_mismatch() <= 1e-12, data.corner_mismatch()])
    rep.table("checks.csv", ["check", "passed", "value"], rows)
    rep.meta["results"]["all_passed"] = bool(all(r[1] for r in rows))
    return 0


COMMANDS = {"evolve": cmd_evolve, "convergence": cmd_convergence, "constraints": cmd_constraints,
            "kirchhoff": cmd_kirchhoff, "norms": cmd_norms, "checks": cmd_checks}


def run(cfg, out, command=None):
    command = command or cfg.command
    rep = Report(out, cfg, command)
    try:
        status = COMMANDS[command](cfg, rep)
    except GoursatError as exc:
        rep.finish(exc.exit_code, f"{type(exc).__name__}: {exc}")
        raise
    except Exception as exc:
        rep.finish(1, f"{type(exc).__name__}: {exc}")
        raise
    rep.finish(status)
    return status


def main(argv=None):
    ap = argparse.ArgumentParser(prog="goursat", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--out", default="goursat-out", help="output directory")
    ap.add_argument("--levels", type=int, help="grid levels for convergence")
    ap.add_argument("--seed", type=int, help="seed for randomized checks")
    args = ap.parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
            cfg = parse_config(text, base_dir=os.path.dirname(os.path.abspath(args.config)))
        else:
            cfg = RunConfig()
        if args.levels is not None:
            cfg.levels = args.levels
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.command = args.command
        status = run(cfg, args.out, args.command)
    except GoursatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return status


if __name__ == "__main__":
    sys.exit(main())
