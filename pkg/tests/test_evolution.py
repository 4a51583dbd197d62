import numpy as np
import pytest

from goursat import catalog
from goursat import einstein as ein
from goursat import evolution as ev
from goursat.errors import DataError, HyperbolicityLossError, StepFailure
from goursat.geometry import WedgeSpec, build_wedge_grid, restrict_to_null
from goursat.system import GoursatData


def plane(h, T=1.0, sigma=5.0):
    return build_wedge_grid(WedgeSpec(T, sigma, ((0, 1), (0, 1)), h, 1.0, True))


def zero(X):
    return np.zeros(X.shape[:-1])


def const_source(c):
    return lambda x: c + 0 * x[..., 0]


def dalembert_fields():
    F = lambda a: np.sin(2 * a) + 0.3 * a**2
    G = lambda b: np.cos(3 * b) - b
    exact = lambda X: F(X[..., 0] - X[..., 1]) + G(X[..., 0] + X[..., 1])
    return exact


def test_zero_data_gives_zero():
    g = plane(0.125)
    res = ev.evolve(catalog.semilinear_cubic(), GoursatData.from_functions(g, zero, zero))
    assert np.nanmax(np.abs(res.u[g.mask])) == 0.0
    assert res.state.filled[g.mask].all()


def test_dalembert_goursat_solution():
    # the box scheme reproduces F(a) + G(b) to round-off
    exact = dalembert_fields()
    for h in (0.125, 0.0625):
        g = plane(h)
        res = ev.evolve(catalog.linear_wave(), GoursatData.from_functions(g, exact, exact))
        err = np.abs(res.u[..., 0] - exact(g.coords()))[g.mask]
        assert err.max() < 1e-12


def test_step_matches_parallelogram_rule():
    exact = dalembert_fields()
    g = plane(0.125)
    st = ev.EvolutionState.from_data(GoursatData.from_functions(g, exact, exact))
    ev.step(st, catalog.linear_wave())
    U = st.U
    assert U[1, 1] == pytest.approx(U[0, 1] + U[1, 0] - U[0, 0], abs=1e-14)
    assert st.front == 2


def test_manufactured_quasilinear_second_order():
    m = catalog.Manufactured(amp=0.2)
    sys = catalog.manufactured_quasilinear(m, eps=0.5)
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = plane(h, T=1.0, sigma=1.0)
        res = ev.evolve(sys, GoursatData.from_functions(g, m.restricted(1), m.restricted(2)))
        errs.append(np.abs(res.u[..., 0] - m.u(g.coords()))[g.mask].max())
        assert max(d["sweeps"] for d in res.state.diagnostics) <= 5
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.8), errs


def test_data_preserved_exactly():
    m = catalog.Manufactured(amp=0.3, pa=0.4, pb=0.9)
    g = plane(0.125)
    data = GoursatData.from_functions(g, m.restricted(1), m.restricted(2))
    res = ev.evolve(catalog.manufactured_semilinear(m), data)
    assert np.array_equal(restrict_to_null(res.u, 1), data.phi[1])
    assert np.array_equal(restrict_to_null(res.u, 2), data.phi[2])


def test_discrete_causality():
    m = catalog.Manufactured(amp=0.3, pa=0.4, pb=0.9)
    g = plane(0.125)
    sys = catalog.manufactured_semilinear(m)
    base = GoursatData.from_functions(g, m.restricted(1), m.restricted(2))
    u0 = ev.evolve(sys, base).u
    j = 5
    phi1 = base.phi[1].copy()
    phi1[j] += 1e-2
    u1 = ev.evolve(sys, GoursatData(g, {1: phi1, 2: base.phi[2]})).u
    diff = np.abs(u1 - u0)[..., 0, 0, 0]
    ib = np.arange(g.N + 1)[None, :] * np.ones((g.N + 1, 1), int)
    outside = g.mask & (ib < j)
    inside = g.mask & (ib >= j)
    assert diff[outside].max() == 0.0
    assert diff[inside].max() > 0.0


def test_corner_incompatible_rejected():
    g = plane(0.125)
    with pytest.raises(DataError, match="phi\\^1 != phi\\^2 on Gamma"):
        ev.evolve(catalog.linear_wave(), GoursatData.from_functions(g, zero, lambda X: 1 + zero(X)))


def test_non_characteristic_data_rejected():
    g = plane(0.125)
    sys = catalog.quasilinear_demo(0.5)
    data = GoursatData.from_functions(g, lambda X: 1 + zero(X), lambda X: 1 + zero(X))
    with pytest.raises(DataError, match="characteristic"):
        ev.evolve(sys, data)


def test_checkpoint_resume_reproduces(tmp_path):
    m = catalog.Manufactured(amp=0.2)
    sys = catalog.manufactured_quasilinear(m, eps=0.5)
    g = plane(0.125)
    data = GoursatData.from_functions(g, m.restricted(1), m.restricted(2))
    full = ev.evolve(sys, data).u
    st = ev.EvolutionState.from_data(data)
    for _ in range(6):
        ev.step(st, sys)
    path = tmp_path / "ck.npz"
    ev.save_checkpoint(path, st)
    resumed = ev.evolve(sys, data, resume=path).u
    assert np.array_equal(np.nan_to_num(full), np.nan_to_num(resumed))


def test_hyperbolicity_loss():
    g = plane(0.125)
    sys = catalog.quasilinear_demo(2.0, source=const_source(5.0))
    with pytest.raises(HyperbolicityLossError) as exc:
        ev.evolve(sys, GoursatData.from_functions(g, zero, zero))
    assert exc.value.location is not None


def test_step_failure_on_diverging_inner_iteration():
    g = plane(0.125)
    sys = catalog.semilinear_cubic(source=const_source(-10.0), coupling=-1e4)
    with pytest.raises(StepFailure, match="diverging") as exc:
        ev.evolve(sys, GoursatData.from_functions(g, zero, zero))
    assert "history" in exc.value.diagnostics and "frontier" in exc.value.diagnostics


def test_semi_global_extent_linear_and_empty():
    make = lambda grid: GoursatData.from_functions(grid, zero, zero)
    sys = catalog.linear_wave(source=const_source(1.0))
    em = ev.semi_global_extent(sys, make, [0.5, 1.0], 2.0, 0.125)
    assert [e.status for e in em.entries] == ["converged", "converged"]
    assert em.pairs() == [(0.5, 2.0), (1.0, 2.0)]
    assert all(e.K0 > 0 for e in em.entries)
    assert ev.semi_global_extent(sys, make, [], 2.0, 0.125).entries == []


def test_semi_global_extent_quasilinear_shrinks():
    make = lambda grid: GoursatData.from_functions(grid, zero, zero)
    sys = catalog.quasilinear_demo(2.0, source=const_source(2.0))
    em = ev.semi_global_extent(sys, make, [0.5, 1.0, 1.5], 4.0, 0.125)
    f = [e.f for e in em.entries]
    assert all(x > 0 for x in f)
    assert np.all(np.diff(f) <= 0) and f[-1] < f[0]


def test_einstein_minkowski_stays_flat():
    g = plane(0.125)
    eta = lambda X: ein.minkowski().sample_vec(X)
    res = ev.evolve_einstein_plane_symmetric(GoursatData.from_functions(g, eta, eta))
    G = ein.sym_from_vec(res.u[g.mask])
    assert np.abs(G - np.diag([1.0, -1, -1, -1])).max() <= 1e-12
    assert res.gauge_trace.max() <= 1e-12
    assert ein.gronwall_check(res.energy_trace).passed


def test_einstein_gauge_wave_drift_and_energy():
    m = ein.harmonic_gauge_wave(eps=0.05)
    drift = []
    for h in (1 / 8, 1 / 16):
        g = plane(h, T=0.5)
        res = ev.evolve_einstein_plane_symmetric(GoursatData.from_functions(g, m.sample_vec, m.sample_vec))
        drift.append(res.gauge_trace[-1])
        v = ein.gronwall_check(res.energy_trace)
        assert v.passed and np.isfinite(v.c_measured)
    assert drift[0] / drift[1] > 3.0
