import numpy as np
import pytest

from goursat import einstein as ein
from goursat import nullconstraints as nc
from goursat.errors import DataError, DegeneracyError, DivergenceError
from goursat.geometry import WedgeSpec, build_wedge_grid
from goursat.system import ETA, GoursatData


def plane_grid(h, T=1.0):
    return build_wedge_grid(WedgeSpec(T, 5.0, ((0, 1), (0, 1)), h, 1.0, True))


def surface_metric(grid, metric, w):
    X = grid.surface_spacetime_coords(w)
    return X, metric.g(X), metric.dg(X)


def test_minkowski_residual_and_transport_zero():
    g = plane_grid(0.125)
    for w in (1, 2):
        X, gs, _ = surface_metric(g, ein.minkowski(), w)
        K0 = np.zeros(gs.shape[1:])
        st = nc.solve_transport(g, gs, K0, w)
        assert np.abs(st.K).max() == 0
        assert np.abs(nc.transport_residual(g, gs, st.K, w)).max() == 0


def test_principal_coefficient_minkowski():
    gi = np.linalg.inv(ETA)
    assert np.allclose(nc.principal_coefficients(gi, 1), [-1, 0, 0])
    assert np.allclose(nc.principal_coefficients(gi, 2), [1, 0, 0])


@pytest.mark.parametrize("w", [1, 2])
def test_transport_rhs_equals_restricted_reduced_ricci(w):
    # independent oracle: reduced Ricci of the exact metric from analytic
    # first and finite-difference second derivatives, restricted pointwise
    m = ein.random_smooth_metric(4, eps=0.05, characteristic=True)
    X = np.random.default_rng(0).uniform(-0.5, 0.5, size=(30, 4))
    X[:, 0] = (-1) ** (w - 1) * X[:, 1]
    g, dg, ddg = m.g(X), m.dg(X), m.ddg(X)
    gi = np.linalg.inv(g)
    Rt = -0.5 * np.einsum("...lg,...ablg->...ab", gi, ddg) + ein.q_lower_order_from(gi, dg)
    K = dg[..., 0]
    # tangential derivatives via the restriction identity
    nu = nc.transverse_covector(w)
    dg_tan = (dg - K[..., None] * nu)[..., 1:]
    ddg_full = ddg - np.einsum("...abm,n->...abmn", ddg[..., 0, :], nu)
    ddg_full = ddg_full - np.einsum("...abn,m->...abmn", ddg_full[..., 0, :], nu)
    ddg_tan = ddg_full[..., 1:, 1:]
    dK = ddg[..., 0, :]
    dK_tan = (dK - dK[..., 0:1] * nu)[..., 1:]
    r = nc.transport_rhs(g, dg_tan, ddg_tan, K, dK_tan, w)
    assert np.abs(r - Rt).max() < 1e-8


def test_transport_split_scaling():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(4, 4))
    g = ETA + 0.03 * (P + P.T)
    dg = rng.normal(size=(4, 4, 3)) * 0.2
    dg = 0.5 * (dg + dg.transpose(1, 0, 2))
    ddg = rng.normal(size=(4, 4, 3, 3)) * 0.2
    ddg = 0.5 * (ddg + ddg.transpose(1, 0, 2, 3))
    ddg = 0.5 * (ddg + ddg.transpose(0, 1, 3, 2))
    K = rng.normal(size=(4, 4))
    K = 0.5 * (K + K.T)
    L0, Q1, Q2 = nc.transport_split(g, dg, ddg, K, 1)
    lam = np.array([-2.0, -1.0, 0.5, 1.0, 2.0, 3.0])
    vals = []
    for l in lam:
        gi = np.linalg.inv(g)
        vals.append(nc.tangential_part(gi, ddg) + ein.q_lower_order_from(gi, nc.full_gradient(dg, l * K, 1)))
    vals = np.array(vals).reshape(len(lam), -1)
    V = np.vander(lam, 4, increasing=True)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    scale = np.abs(vals).max()
    assert np.abs(coef[3]).max() <= 1e-10 * scale
    assert np.allclose(coef[0], L0.ravel(), atol=1e-10 * scale)
    assert np.allclose(coef[1], Q1.ravel(), atol=1e-10 * scale)
    assert np.allclose(coef[2], Q2.ravel(), atol=1e-10 * scale)
    _, Q1b, Q2b = nc.transport_split(g, dg, ddg, 2 * K, 1)
    assert np.allclose(Q1b, 2 * Q1) and np.allclose(Q2b, 4 * Q2)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_scalar_model_exponential(sign):
    lam, K0 = 0.8, 1.3
    prob = nc.TransportProblem(c1=lambda s: sign * 0.5 * np.ones(()), lower=lambda s, K: lam * K)
    errs = []
    for n in (11, 21, 41):
        s = np.linspace(0, 1, n)
        K = nc.march(prob, np.array(K0), s)
        errs.append(abs(K[-1] - K0 * np.exp(-sign * 2 * lam * s[-1])))
    ratios = np.array(errs[:-1]) / errs[1:]
    assert np.all(ratios > 14)


def test_march_degeneracy_and_blowup():
    prob = nc.TransportProblem(c1=lambda s: np.array(0.5 - s), lower=lambda s, K: K)
    with pytest.raises(DegeneracyError):
        nc.march(prob, np.array(1.0), np.linspace(0, 1, 11))
    prob = nc.TransportProblem(c1=lambda s: np.array(1.0), lower=lambda s, K: -K**2)
    with pytest.raises(DivergenceError):
        nc.march(prob, np.array(5.0), np.linspace(0, 1, 41), bound=1e6)


@pytest.mark.parametrize("w", [1, 2])
def test_gauge_wave_transport_second_order(w):
    m = ein.harmonic_gauge_wave(eps=0.05)
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = plane_grid(h)
        X, gs, dg = surface_metric(g, m, w)
        st = nc.solve_transport(g, gs, dg[0, ..., 0], w)
        errs.append(np.abs(st.K - dg[..., 0]).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9), errs


def _corner(grid, h1=None, h2=None, omega=1.0):
    n = (grid.N + 1, len(grid.x2), len(grid.x3))
    ident = np.zeros(n + (3,))
    ident[..., 0] = ident[..., 2] = 1.0
    h = {1: ident if h1 is None else h1, 2: ident if h2 is None else h2}
    z = np.zeros(n[1:])
    return nc.CornerData(omega=omega + z, omega0=z, omega1=z, b12=z, b13=z, h=h)


def test_flat_conformal_data_is_minkowski_and_round_trips():
    g = plane_grid(0.125)
    data = nc.assemble_conformal_data(g, _corner(g))
    for w in (1, 2):
        G = nc.metric_from_vec_field(data.phi[w])
        assert np.array_equal(G, np.broadcast_to(ETA, G.shape))
        st = nc.solve_transport(g, G, np.zeros(G.shape[1:]), w)
        assert np.abs(st.K).max() == 0
        # gauge vector on S from the surface gradient with K = 0
        d1, _ = nc.surface_derivatives(g, G, w)
        gi = np.linalg.inv(G)
        Gv = ein.contract_gauge(gi, ein.christoffel_from(gi, nc.full_gradient(d1, st.K, w)))
        assert np.abs(Gv).max() == 0
    assert nc.corner_compatibility(data).passed


def test_unimodular_h_accepted_and_determinant():
    g = plane_grid(0.125)
    x1 = g.surface_x1(1)
    lam = 0.3 * np.sin(3 * x1)
    hw = np.zeros((g.N + 1, 1, 1, 3))
    hw[..., 0] = np.exp(lam)[:, None, None]
    hw[..., 2] = np.exp(-lam)[:, None, None]
    prof = (1.7 + 0.2 * np.sin(x1))[:, None, None]
    Om = {1: prof, 2: prof}
    data = nc.assemble_conformal_data(g, _corner(g, hw, hw, omega=1.7), omega=Om)
    G = nc.metric_from_vec_field(data.phi[1])
    det2 = np.linalg.det(G[..., 2:, 2:])
    assert np.allclose(det2, np.broadcast_to(prof, det2.shape) ** 2, rtol=1e-13)


def test_bad_determinant_rejected():
    g = plane_grid(0.125)
    hw = np.zeros((g.N + 1, 1, 1, 3))
    hw[..., 0], hw[..., 2] = 2.0, 1.0
    with pytest.raises(DataError, match="det"):
        nc.assemble_conformal_data(g, _corner(g, hw, hw))
    with pytest.raises(DataError, match="positive"):
        nc.assemble_conformal_data(g, _corner(g, omega=-1.0))


def test_corner_compatibility_detects_shift():
    g = plane_grid(0.125)
    m = ein.harmonic_gauge_wave(eps=0.05)
    phi = {w: m.sample_vec(g.surface_spacetime_coords(w)) for w in (1, 2)}
    assert nc.corner_compatibility(GoursatData(g, phi)).passed
    phi[2] = phi[2] + 1e-3
    rep = nc.corner_compatibility(GoursatData(g, phi))
    assert not rep.passed and rep.phi_mismatch == pytest.approx(1e-3)
