"""Transport of the transverse derivative K^w = [d_0 g]^w along a null surface,
and assembly of conformal Goursat data for the reduced vacuum equations.

On S^w the restricted equations contain no second transverse derivative (the
surface is characteristic), so with the surface metric known they reduce to

    c^i d_i K + L0 + Q1(K) + Q2(K, K) = 0,   c^i = -(g^{0i} + (-1)^w g^{1i}),

a first-order system marched outward from Gamma.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .einstein import PAIRS, inverse, q_lower_order_from, vec_from_sym
from .errors import DataError, DegeneracyError, DivergenceError
from .geometry import surface_partial
from .stencils import diff_axis
from .system import ETA, GoursatData


def transverse_covector(w):
    return np.array([1.0, (-1.0) ** w, 0.0, 0.0])


def full_gradient(dg_tan, K, w):
    """[d_mu g]^w from tangential derivatives (..., 4, 4, 3) and K (..., 4, 4)."""
    dg = np.empty(K.shape + (4,))
    dg[..., 0] = K
    dg[..., 1:] = dg_tan
    dg[..., 1] += (-1) ** w * K
    return dg


def principal_coefficients(gi, w):
    """c^i, i = 1..3, multiplying d_i K in the restricted equations."""
    return -(gi[..., 0, 1:] + (-1) ** w * gi[..., 1, 1:])


def tangential_part(gi, ddg_tan):
    """-1/2 g^{ij} d_i d_j [g] with ddg_tan (..., 4, 4, 3, 3)."""
    return -0.5 * np.einsum("...ij,...abij->...ab", gi[..., 1:, 1:], ddg_tan)


def transport_rhs(g, dg_tan, ddg_tan, K, dK_tan, w):
    """Residual of the restricted reduced equations on S^w (zero for a solution).

    g (..., 4, 4) surface metric, dg_tan (..., 4, 4, 3) and ddg_tan
    (..., 4, 4, 3, 3) its tangential derivatives, K (..., 4, 4), dK_tan
    (..., 4, 4, 3) tangential derivatives of K.
    """
    gi = inverse(g)
    c = principal_coefficients(gi, w)
    return (np.einsum("...i,...abi->...ab", c, dK_tan) + tangential_part(gi, ddg_tan)
            + q_lower_order_from(gi, full_gradient(dg_tan, K, w)))


def transport_split(g, dg_tan, ddg_tan, K, w):
    """(L0, Q1, Q2): the K-free, K-linear and K-quadratic lower-order parts."""
    gi = inverse(g)

    def lower(KK):
        return tangential_part(gi, ddg_tan) + q_lower_order_from(gi, full_gradient(dg_tan, KK, w))

    L0 = lower(np.zeros_like(K))
    Lp, Lm = lower(K), lower(-K)
    return L0, 0.5 * (Lp - Lm), 0.5 * (Lp + Lm) - L0


# --- generic marcher ---------------------------------------------------------

@dataclass
class TransportState:
    K: np.ndarray
    s: np.ndarray
    w: int = 1
    position: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.K[: self.position + 1])):
            raise DivergenceError("transport state is not finite")


@dataclass
class TransportProblem:
    """c1(s) dK/ds + ctrans(s) . grad_trans K + lower(s, K) = 0.

    c1(s) has the shape of the transverse grid, ctrans(s) appends an axis of
    length 2 (or is None), lower(s, K) returns an array shaped like K.
    """

    c1: object
    lower: object
    ctrans: object = None
    trans_deriv: object = None

    def rhs(self, s, K):
        c1 = np.asarray(self.c1(s), dtype=float)
        total = np.asarray(self.lower(s, K), dtype=float)
        if self.ctrans is not None:
            ct = np.asarray(self.ctrans(s), dtype=float)
            extra = K.ndim - ct.ndim + 1
            for k in range(2):
                dk = self.trans_deriv(K, k)
                total = total + ct[..., k].reshape(ct.shape[:-1] + (1,) * extra) * dk
        extra = K.ndim - c1.ndim
        return -total / c1.reshape(c1.shape + (1,) * extra)


def march(problem, K0, s, bound=1e8, degeneracy_tol=1e-10):
    """Classical RK4 from s[0] through the nodes s[1:], one step per interval."""
    K0 = np.asarray(K0, dtype=float)
    out = np.empty((len(s),) + K0.shape)
    out[0] = K0
    K = K0
    for m in range(len(s) - 1):
        for ss in (s[m], 0.5 * (s[m] + s[m + 1]), s[m + 1]):
            c1 = np.asarray(problem.c1(ss))
            if np.any(np.abs(c1) < degeneracy_tol):
                loc = np.unravel_index(np.argmin(np.abs(c1)), c1.shape) if c1.ndim else ()
                raise DegeneracyError(f"transport coefficient vanishes at s = {ss:.6g}, transverse index {loc}")
        dt = s[m + 1] - s[m]
        k1 = problem.rhs(s[m], K)
        k2 = problem.rhs(s[m] + dt / 2, K + dt / 2 * k1)
        k3 = problem.rhs(s[m] + dt / 2, K + dt / 2 * k2)
        k4 = problem.rhs(s[m + 1], K + dt * k3)
        K = K + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(K)) or np.abs(K).max() > bound:
            raise DivergenceError(f"transport blow-up at s = {s[m + 1]:.6g} (|K| > {bound:g})")
        out[m + 1] = K
    return out


# --- Einstein transport on a wedge grid --------------------------------------

def surface_derivatives(grid, g_s, w):
    """Tangential first and second derivatives of a D^w field by composition."""
    d1 = np.stack([surface_partial(grid, g_s, i, w) for i in (1, 2, 3)], axis=-1)
    d2 = np.stack([np.stack([surface_partial(grid, d1[..., i], j, w) for j in (1, 2, 3)], axis=-1)
                   for i in range(3)], axis=-2)
    return d1, d2


def _trans_deriv(grid):
    """Derivative along transverse axis k of a (n2, n3, ...) field."""

    def d(K, k):
        if K.shape[k] == 1:
            return np.zeros_like(K)
        return diff_axis(K, k, grid.spec.h_trans, periodic=grid.periodic)

    return d


def solve_transport(grid, g_s, K_corner, w, dg_tan=None, ddg_tan=None, bound=1e8):
    """March K^w outward from Gamma over the D^w lattice.

    g_s (N+1, n2, n3, 4, 4) is the surface metric; K_corner (n2, n3, 4, 4)
    the values of [d_0 g] on Gamma. Surface data between lattice nodes are
    cubic-spline interpolated in s = |x^1|.
    """
    g_s = np.asarray(g_s, dtype=float)
    if dg_tan is None or ddg_tan is None:
        dg_tan, ddg_tan = surface_derivatives(grid, g_s, w)
    s = 0.5 * grid.h * np.arange(grid.N + 1)
    sign = 1.0 if w == 1 else -1.0
    sp_g = CubicSpline(s, g_s, axis=0)
    sp_d1 = CubicSpline(s, dg_tan, axis=0)
    sp_d2 = CubicSpline(s, ddg_tan, axis=0)
    cache = {}

    def coeffs(ss):
        if ss not in cache:
            gi = inverse(sp_g(ss))
            cache.clear()
            cache[ss] = (gi, principal_coefficients(gi, w), sp_d1(ss), sp_d2(ss))
        return cache[ss]

    def c1(ss):
        # d/dx1 = sign d/ds
        return sign * coeffs(ss)[1][..., 0]

    def ctrans(ss):
        return coeffs(ss)[1][..., 1:]

    def lower(ss, K):
        gi, _, d1, d2 = coeffs(ss)
        return tangential_part(gi, d2) + q_lower_order_from(gi, full_gradient(d1, K, w))

    prob = TransportProblem(c1=c1, lower=lower, ctrans=ctrans, trans_deriv=_trans_deriv(grid))
    K = march(prob, K_corner, s, bound=bound)
    return TransportState(K=K, s=s, w=w, position=len(s) - 1)


def transport_residual(grid, g_s, K, w):
    """Node-wise residual of the restricted equations, all derivatives by
    second-order surface differences."""
    d1, d2 = surface_derivatives(grid, g_s, w)
    dK = np.stack([surface_partial(grid, K, i, w) for i in (1, 2, 3)], axis=-1)
    return transport_rhs(g_s, d1, d2, K, dK, w)


# --- conformal data ----------------------------------------------------------

@dataclass
class CornerData:
    """Omega~ and its prescribed derivatives on Gamma, the prescribed g_{0a,1}
    on Gamma, and the unimodular fields h^w = (h22, h23, h33) on D^w."""

    omega: np.ndarray
    omega0: np.ndarray
    omega1: np.ndarray
    b12: np.ndarray
    b13: np.ndarray
    h: dict
    det_tol: float = 1e-10

    def validate(self):
        problems = []
        for w, hw in self.h.items():
            hw = np.asarray(hw, dtype=float)
            det = hw[..., 0] * hw[..., 2] - hw[..., 1] ** 2
            if np.abs(det - 1).max() > self.det_tol:
                problems.append(f"det h^{w} != 1 (max deviation {np.abs(det - 1).max():.3e})")
            if np.any(hw[..., 0] <= 0) or np.any(det <= 0):
                problems.append(f"h^{w} is not positive definite")
        if 1 in self.h and 2 in self.h:
            mis = np.abs(np.asarray(self.h[1])[0] - np.asarray(self.h[2])[0]).max()
            if mis > 1e-12:
                problems.append(f"h^1 != h^2 on Gamma (max mismatch {mis:.3e})")
        if np.any(np.asarray(self.omega) <= 0):
            problems.append("Omega~ must be positive on Gamma")
        if problems:
            raise DataError("; ".join(problems))


def assemble_conformal_data(grid, corner, omega=None):
    """Metric Goursat data with g_ab = -Omega h_ab on the transverse block.

    The remaining components follow the flat double-null ansatz g00 = 1,
    g11 = -1, g0a = g1a = g01 = 0. `omega` maps w to a positive D^w field;
    by default Omega~ is extended constantly along each surface.
    """
    corner.validate()
    shape = (grid.N + 1, len(grid.x2), len(grid.x3))
    phi = {}
    Om = {}
    for w in (1, 2):
        if omega is not None and w in omega:
            O = np.broadcast_to(np.asarray(omega[w], dtype=float), shape)
        else:
            O = np.broadcast_to(np.asarray(corner.omega, dtype=float), shape[1:])[None].repeat(shape[0], 0)
        if np.any(O <= 0):
            raise DataError(f"Omega must be positive on S^{w}")
        if np.abs(O[0] - np.broadcast_to(corner.omega, shape[1:])).max() > 1e-12:
            raise DataError(f"Omega on S^{w} does not match Omega~ on Gamma")
        hw = np.asarray(corner.h[w], dtype=float)
        g = np.broadcast_to(ETA, shape + (4, 4)).copy()
        g[..., 2, 2] = -O * hw[..., 0]
        g[..., 2, 3] = g[..., 3, 2] = -O * hw[..., 1]
        g[..., 3, 3] = -O * hw[..., 2]
        phi[w] = vec_from_sym(g)
        Om[w] = O
    data = GoursatData(grid, phi)
    h_gamma = np.asarray(corner.h[1])[0]
    data.corner = {
        "Omega": np.asarray(corner.omega),
        "Omega_0": np.asarray(corner.omega0),
        "Omega_1": np.asarray(corner.omega1),
        "g02_1": np.asarray(corner.b12),
        "g03_1": np.asarray(corner.b13),
        # transverse derivative of the block on Gamma induced by Omega_0
        "K_ab": -np.asarray(corner.omega0)[..., None] * h_gamma,
        "Omega_fields": Om,
    }
    return data


@dataclass
class CompatibilityReport:
    passed: bool
    phi_mismatch: float
    h_mismatch: float = 0.0
    tol: float = 1e-12


def corner_compatibility(data, h=None, tol=1e-12):
    mis = data.corner_mismatch()
    hm = 0.0
    if h is not None:
        hm = float(np.abs(np.asarray(h[1])[0] - np.asarray(h[2])[0]).max())
    return CompatibilityReport(bool(mis <= tol and hm <= tol), mis, hm, tol)


def metric_from_vec_field(phi):
    g = np.empty(phi.shape[:-1] + (4, 4))
    for k, (a, b) in enumerate(PAIRS):
        g[..., a, b] = g[..., b, a] = phi[..., k]
    return g
