"""The twelve acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal
summary. Criterion 1 cannot be met by this scheme (see the xfail reason);
it is implemented as stated and expected to fail.
"""
import time

import numpy as np
import pytest

from goursat import catalog
from goursat import einstein as ein
from goursat import evolution as ev
from goursat import kirchhoff as kh
from goursat import norms
from goursat import nullconstraints as nc
from goursat.geometry import WedgeSpec, build_wedge_grid, characteristic_residual, restriction_identity_residual
from goursat.stencils import BoxLattice
from goursat.system import ETA, GoursatData, QuasilinearSystem, check_G1_linearity


def plane(h, T=1.0, sigma=5.0):
    return build_wedge_grid(WedgeSpec(T, sigma, ((0, 1), (0, 1)), h, 1.0, True))


def orders(errs):
    errs = np.asarray(errs, dtype=float)
    return np.log2(errs[:-1] / errs[1:])


@pytest.mark.xfail(strict=True, reason="the box scheme reproduces F(a) + G(b) exactly, so the error "
                                       "is round-off and has no asymptotic order")
def test_c01_dalembert_order(record):
    F = lambda a: np.sin(2 * a) + 0.3 * a**2
    G = lambda b: np.cos(3 * b) - b
    exact = lambda X: F(X[..., 0] - X[..., 1]) + G(X[..., 0] + X[..., 1])
    t0 = time.perf_counter()
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = plane(h)
        res = ev.evolve(catalog.linear_wave(), GoursatData.from_functions(g, exact, exact))
        errs.append(np.abs(res.u[..., 0] - exact(g.coords()))[g.mask].max())
    dt = time.perf_counter() - t0
    p = orders(errs)
    ok = bool(np.all(np.abs(p - 2.0) <= 0.2) and dt < 10)
    record(1, "d'Alembert order 2.0 +- 0.2", ok,
           f"errors {', '.join(f'{e:.2e}' for e in errs)}, orders {np.round(p, 2).tolist()}, {dt:.1f} s")
    assert np.all(np.array(errs) < 1e-12)  # the scheme itself is correct
    assert ok


def test_c02_kirchhoff_matches_evolution(record):
    fn = lambda X: np.sin(2 * (X[..., 0] - X[..., 1])) + 0.5 * np.cos(3 * (X[..., 0] + X[..., 1]))
    t0 = time.perf_counter()
    g = plane(1 / 16, T=0.5, sigma=0.5)
    data = GoursatData.from_functions(g, fn, fn)
    sys = catalog.linear_wave()
    u_k, tr = kh.picard_iterate(g, data, sys)
    u_e = ev.evolve(sys, data).u
    qerr = kh.quadrature_error(g, data, sys, u_k)
    gap = float(np.abs(u_k - u_e)[kh.apex_mask(g)].max())
    dt = time.perf_counter() - t0
    bound = 5 * (g.h**2 + qerr)
    ok = tr.verdict == "converged" and len(tr.d) == 1 and gap <= bound and dt < 60
    record(2, "Kirchhoff vs evolution", ok,
           f"sweeps {len(tr.d)}, gap {gap:.3e} <= {bound:.3e}, {dt:.1f} s")
    assert ok


def test_c03_picard_contraction(record):
    m = catalog.Manufactured(amp=0.1, pa=0.4, pb=0.7)
    sys = catalog.manufactured_semilinear(m)
    g = plane(1 / 8, T=0.5, sigma=0.5)
    data = GoursatData.from_functions(g, m.restricted(1), m.restricted(2))
    u, tr = kh.picard_iterate(g, data, sys, tol=1e-13)
    ue = np.where(g.mask[:, :, None, None], m.u(g.coords()), np.nan)[..., None]
    apex = kh.apex_mask(g)
    # the discrete fixed point lies within defect / (1 - q) of u_exact
    defect = float(np.abs(kh.kirchhoff_apply(g, data, sys, ue) - ue)[apex].max())
    q = max(tr.ratios)
    err = float(np.abs(u - ue)[apex].max())
    bound = 1e-6 + defect / (1 - q)
    ok = q < 0.9 and err <= bound and tr.verdict == "converged"
    record(3, "Picard contraction", ok, f"max ratio {q:.2e}, |u - u_exact| {err:.3e} <= {bound:.3e}")
    assert ok


def test_c04_characteristic_condition(record):
    g = plane(1 / 16)
    flat = catalog.linear_wave()
    worst = 0.0
    for w in (1, 2):
        phi = np.zeros((g.N + 1, 1, 1, 1))
        worst = max(worst, float(np.abs(characteristic_residual(flat, phi, g, w)).max()))
    einsys = ein.einstein_reduced_system()
    for w in (1, 2):
        phi = ein.minkowski().sample_vec(g.surface_spacetime_coords(w))
        worst = max(worst, float(np.abs(characteristic_residual(einsys, phi, g, w)).max()))
    ok = worst <= 1e-12
    record(4, "characteristic residual", ok, f"max {worst:.1e}")
    assert ok


def test_c05_restriction_identity(record):
    ps = []
    for seed in range(5):
        m = ein.random_smooth_metric(seed, eps=0.1)
        errs = []
        for h in (1 / 8, 1 / 16, 1 / 32):
            g = build_wedge_grid(WedgeSpec(0.5, 5.0, ((0, 1), (0, 1)), h, h, False))
            errs.append(max(restriction_identity_residual(g, m.g, m.dg, w) for w in (1, 2)))
        ps.extend(orders(errs))
    ps = np.array(ps)
    ok = bool(np.all(np.abs(ps - 2) <= 0.3))
    record(5, "restriction identity order", ok, f"orders in [{ps.min():.2f}, {ps.max():.2f}]")
    assert ok


ENERGY_RUNS = []


def test_c06_einstein_trivial_sector(record):
    g = plane(1 / 16, T=1.0)
    n = (g.N + 1, 1, 1)
    ident = np.zeros(n + (3,))
    ident[..., 0] = ident[..., 2] = 1.0
    z = np.zeros(n[1:])
    corner = nc.CornerData(omega=1.0 + z, omega0=z, omega1=z, b12=z, b13=z, h={1: ident, 2: ident})
    data = nc.assemble_conformal_data(g, corner)
    kmax = 0.0
    for w in (1, 2):
        G = ein.sym_from_vec(data.phi[w])
        kmax = max(kmax, float(np.abs(nc.solve_transport(g, G, np.zeros(G.shape[1:]), w).K).max()))
    res = ev.evolve_einstein_plane_symmetric(data)
    ENERGY_RUNS.append(res.energy_trace)
    gdev = float(np.abs(ein.sym_from_vec(res.u[g.mask]) - ETA).max())
    gauge = float(res.gauge_trace.max())
    ok = kmax == 0.0 and gdev <= 1e-12 and gauge <= 1e-12
    record(6, "Einstein trivial sector", ok, f"max|K| {kmax:.1e}, max|g - eta| {gdev:.1e}, max|Gamma| {gauge:.1e}")
    assert ok


def test_c07_gauge_drift_order(record):
    m = ein.harmonic_gauge_wave(eps=1e-3)
    drift = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        g = plane(h, T=1.0)
        res = ev.evolve_einstein_plane_symmetric(GoursatData.from_functions(g, m.sample_vec, m.sample_vec))
        ENERGY_RUNS.append(res.energy_trace)
        drift.append(float(res.gauge_trace[-1]))
    factors = np.array(drift[:-1]) / np.array(drift[1:])
    ok = bool(np.all(np.abs(factors - 4) <= 1))
    record(7, "gauge drift factor 4 +- 1", ok,
           f"max|Gamma|(t=1) {', '.join(f'{d:.2e}' for d in drift)}, factors {np.round(factors, 2).tolist()}")
    assert ok


def test_c08_symbol_eigenvalues(record):
    rng = np.random.default_rng(0)
    worst = 0.0
    real = True
    for _ in range(1000):
        P = rng.normal(size=(4, 4))
        gi = np.linalg.inv(ETA + 0.1 * (P + P.T))
        xi = rng.normal(size=3)
        w = int(rng.integers(1, 3))
        lam = ein.symbol_eigenvalues(gi, xi, w)
        real &= bool(np.isrealobj(lam))
        worst = max(worst, float(np.abs(ein.symbol_eigenvalues(gi, 2 * xi, w) - 2 * lam).max()))
    xi = np.array([0.7, -0.2, 1.3])
    mink = ein.symbol_eigenvalues(np.linalg.inv(ETA), xi, 2)
    ok = real and worst == 0.0 and np.array_equal(mink, np.array([-xi[0] / 2, 0.0, 0.0]) + 0.0)
    record(8, "symbol eigenvalues", ok, f"real {real}, homogeneity defect {worst:.1e}, Minkowski {mink.tolist()}")
    assert ok


def test_c09_gronwall(record):
    assert ENERGY_RUNS, "criteria 6 and 7 supply the Einstein runs"
    verdicts = [ein.gronwall_check(tr) for tr in ENERGY_RUNS]
    runs_ok = all(v.passed and np.isfinite(v.c_measured) for v in verdicts)
    t = np.linspace(0, 1, 11)
    syn = ein.gronwall_check(ein.EnergyTrace(t, 2.0 * np.exp(1.5 * t)), 1.5)
    syn_ok = syn.passed and abs(syn.c_measured - 1.5) <= 1e-12 and abs(syn.worst_ratio * (1 + 1e-6) - 1) <= 1e-12
    ok = runs_ok and syn_ok
    record(9, "Gronwall monitor", ok,
           f"{len(verdicts)} Einstein runs, c_hat {', '.join(f'{v.c_measured:.3g}' for v in verdicts)}; "
           f"synthetic c_hat {syn.c_measured:.12g}")
    assert ok


def test_c10_ricci_identity(record):
    ps = []
    for seed in range(3):
        m = ein.random_smooth_metric(seed, eps=0.05)
        errs = []
        for n in (9, 17):
            lat = BoxLattice((0.1, -0.2, 0.3, 0.0), (0.5 / (n - 1),) * 4, (n,) * 4)
            r = ein.ricci_identity_residual(ein.MetricField(m.g(lat.coords()), lat))
            # composed one-sided stencils are first order on a two-node boundary layer
            errs.append(np.abs(r[2:-2, 2:-2, 2:-2, 2:-2]).max())
        ps.extend(orders(errs))
    ps = np.array(ps)
    ok = bool(np.all(np.abs(ps - 2) <= 0.3))
    record(10, "Ricci identity order", ok, f"orders {np.round(ps, 2).tolist()}")
    assert ok


def test_c11_null_form(record):
    nf = catalog.null_form_system(1.0, 0.0)
    b = np.array([0.3, -1.0, 0.5, 2.0])

    def f_good(x, u, du):
        return nf.f(x, u, du) + np.einsum("...a,a->...", du[..., 0, :], b)[..., None] + 0.7 * u

    good = QuasilinearSystem(n=1, f=f_good, name="linear_plus_null")
    bad = catalog.null_form_system(0.0, 1.0)
    box_y = ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    box_u = (np.array([-1.0]), np.array([1.0]))
    box_du = (-np.ones(4), np.ones(4))
    delta = 0.1
    rg = [check_G1_linearity(good, w, box_y, box_u, box_du, delta=delta) for w in (1, 2)]
    rb = [check_G1_linearity(bad, w, box_y, box_u, box_du, delta=delta) for w in (1, 2)]
    quad = [r.max_second_difference for r in rb]
    match = all(abs(q - 2 * delta**2) <= 0.01 * 2 * delta**2 for q in quad)
    ok = all(r.passed for r in rg) and not any(r.passed for r in rb) and match
    record(11, "null-form structure", ok,
           f"L + Q0 defect {max(r.max_second_difference for r in rg):.1e}, (d0 u)^2 defect {quad[0]:.6f} "
           f"vs 2 delta^2 = {2 * delta**2:.6f}")
    assert ok


def test_c12_norm_analytics(record):
    c, t = 1.5, 1.0
    area = 2.0
    errK, errE = [], []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = build_wedge_grid(WedgeSpec(1.0, 5.0, ((0, 1), (0, 2)), h, 0.25, False))
        r = norms.wedge_norms(g, np.full(g.shape, c), 0, t)
        errK.append(abs(r["K"] - c * np.sqrt(2 * area * t)))
        errE.append(abs(r["E"] - c * np.sqrt(2 * area)))
    k_ok = all(e <= 2 * c * h for e, h in zip(errK, (1 / 8, 1 / 16, 1 / 32))) and errK[2] < errK[0]
    e_ok = max(errE) <= 1e-12
    g = build_wedge_grid(WedgeSpec(1.0, 5.0, ((0, 1), (0, 1)), 0.125, 0.25, False))
    X = g.coords()
    v = np.sin(X[..., 0] + X[..., 2]) + X[..., 1] * X[..., 3]
    r1, r3 = norms.script_norms(g, v, 2, t), norms.script_norms(g, -3 * v, 2, t)
    hom = max(abs(r3.values[k] - 3 * r1.values[k]) / max(1.0, r1.values[k]) for k in r1.values)
    ssq = 0.0
    for big, parts in (("scriptK(Y_t)", ("K(Y_t)", "scriptK(S1_t)", "scriptK(S2_t)")),
                       ("scriptE(Y_t)", ("E(Y_t)", "scriptE(S1_t)", "scriptE(S2_t)"))):
        lhs = r1.values[big] ** 2
        ssq = max(ssq, abs(lhs - sum(r1.values[p] ** 2 for p in parts)) / lhs)
    ok = k_ok and e_ok and hom <= 1e-12 and ssq <= 1e-12
    record(12, "norm analytics", ok,
           f"K0 errors {', '.join(f'{e:.2e}' for e in errK)}, E0 error {max(errE):.1e}, "
           f"homogeneity {hom:.1e}, sum of squares {ssq:.1e}")
    assert ok
