"""Cone-integral (Kirchhoff) representation on the flat background and
Picard iteration for semilinear systems.

For box u = F in flat space with Goursat data on S = S^1 u S^2, the value at
an apex M0 = (t0, y0) of the wedge is

    u(M0) = 1/(4 pi) int dOmega int_0^psi lam F(t0 - lam, y0 + lam p) dlam
          + 1/(4 pi) int dOmega 2 psi G(p) / (1 + |mu|')
          + 1/(2 pi) int_0^{2 pi} phi_Gamma(circle of radius sqrt(a0 b0)) dtheta,

where psi is the backward-cone hit parameter, mu = p_1, and on the part of
the sphere whose rays land on S^w the boundary density is the outward
surface derivative d phi^w / ds at the landing point divided by 1 + mu
(w = 1) or 1 - mu (w = 2). The equation is box u + f = 0, so F = -f.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainCoverageError
from .stencils import diff_axis


# --- rays --------------------------------------------------------------------

def direction(lam2, lam3):
    lam2 = np.asarray(lam2, dtype=float)
    lam3 = np.asarray(lam3, dtype=float)
    return np.stack([np.sin(lam2) * np.cos(lam3), np.sin(lam2) * np.sin(lam3), np.cos(lam2)], axis=-1)


def _psi_from_p1(t0, x10, p1):
    a0, b0 = t0 - x10, t0 + x10
    with np.errstate(divide="ignore"):
        psi1 = np.where(1 + p1 > 0, a0 / np.where(1 + p1 > 0, 1 + p1, 1.0), np.inf)
        psi2 = np.where(1 - p1 > 0, b0 / np.where(1 - p1 > 0, 1 - p1, 1.0), np.inf)
    return np.minimum(psi1, psi2), np.where(psi1 <= psi2, 1, 2)


def psi_hit(M0, lam2, lam3):
    """Smallest lam1 >= 0 with t0 - lam1 = |x1_0 + lam1 p1| (closed form)."""
    t0, x10 = float(M0[0]), float(M0[1])
    p1 = direction(lam2, lam3)[..., 0]
    psi, _ = _psi_from_p1(t0, x10, p1)
    return psi


def psi_hit_bisect(M0, lam2, lam3, xtol=1e-14):
    t0, x10 = float(M0[0]), float(M0[1])
    p1 = float(direction(lam2, lam3)[0])

    def F(lam):
        return (t0 - lam) - abs(x10 + lam * p1)

    if F(0.0) <= 0:
        return 0.0
    return brentq(F, 0.0, t0, xtol=xtol, rtol=4 * np.finfo(float).eps)


@dataclass
class ConeRay:
    apex: np.ndarray
    lam2: float
    lam3: float
    psi: float = None
    on_surface: bool = False

    def __post_init__(self):
        self.apex = np.asarray(self.apex, dtype=float)
        if self.psi is None:
            self.psi = float(psi_hit(self.apex, self.lam2, self.lam3))
        self.on_surface = bool(self.psi == 0.0)

    @property
    def p(self):
        return direction(self.lam2, self.lam3)

    def point(self, lam1):
        lam1 = np.asarray(lam1, dtype=float)
        x = np.empty(lam1.shape + (4,))
        x[..., 0] = self.apex[0] - lam1
        x[..., 1:] = self.apex[1:] + lam1[..., None] * self.p
        return x


# --- Omega transport ---------------------------------------------------------

@dataclass
class OmegaState:
    lam: np.ndarray
    Omega: np.ndarray
    Omega0: np.ndarray

    @property
    def Omega_hat(self):
        """(Omega - Omega0) / lam1, with the lam1 = 0 value taken from the first step."""
        hat = np.empty_like(self.Omega)
        hat[1:] = (self.Omega[1:] - self.Omega0) / self.lam[1:, None, None]
        hat[0] = hat[1] if len(self.lam) > 1 else 0.0
        return hat


def transport_omega(H, lam, Omega0=None):
    """RK4 for Omega' = H(lam1) Omega on the given lam1 nodes.

    H maps lam1 to an (m, m) matrix; Omega0 defaults to the identity.
    """
    lam = np.asarray(lam, dtype=float)
    H0 = np.asarray(H(lam[0]), dtype=float)
    m = H0.shape[0]
    O0 = np.eye(m) if Omega0 is None else np.asarray(Omega0, dtype=float)
    out = np.empty((len(lam),) + O0.shape)
    out[0] = O0
    O = O0
    for k in range(len(lam) - 1):
        d = lam[k + 1] - lam[k]
        try:
            k1 = H(lam[k]) @ O
            k2 = H(lam[k] + d / 2) @ (O + d / 2 * k1)
            k3 = H(lam[k] + d / 2) @ (O + d / 2 * k2)
            k4 = H(lam[k + 1]) @ (O + d * k3)
        except (ValueError, FloatingPointError) as exc:
            raise DomainCoverageError(f"H evaluation failed at lam1 = {lam[k]:.6g}: {exc}") from exc
        O = O + d / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = O
    return OmegaState(lam, out, O0)


# --- interpolation -----------------------------------------------------------

def _axis_weights(x, x0, dx, n, periodic, name):
    """Left index and fraction for linear interpolation on a uniform axis."""
    if n == 1:
        z = np.zeros(np.shape(x), dtype=int)
        return z, z, np.zeros(np.shape(x))
    r = (np.asarray(x) - x0) / dx
    if periodic:
        i = np.floor(r).astype(int)
        t = r - i
        return i % n, (i + 1) % n, t
    tol = 1e-9
    if np.any(r < -tol) or np.any(r > n - 1 + tol):
        bad = float(np.asarray(x).ravel()[np.argmax((r < -tol) | (r > n - 1 + tol))])
        raise DomainCoverageError(f"cone leaves the grid along {name} (coordinate {bad:.6g})")
    r = np.clip(r, 0, n - 1)
    i = np.minimum(np.floor(r).astype(int), n - 2)
    return i, i + 1, r - i


def interpolate_wedge(grid, field, X):
    """Multilinear interpolation of a wedge field at spacetime points X."""
    a = X[..., 0] - X[..., 1]
    b = X[..., 0] + X[..., 1]
    N = grid.N
    ia0, ia1, ta = _axis_weights(a, 0.0, grid.h, N + 1, False, "a")
    ib0, ib1, tb = _axis_weights(b, 0.0, grid.h, N + 1, False, "b")
    ht = grid.spec.h_trans
    i20, i21, t2 = _axis_weights(X[..., 2], grid.x2[0], ht, len(grid.x2), grid.periodic, "x2")
    i30, i31, t3 = _axis_weights(X[..., 3], grid.x3[0], ht, len(grid.x3), grid.periodic, "x3")
    out = 0.0
    extra = field.ndim - 4
    for ja, wa in ((ia0, 1 - ta), (ia1, ta)):
        for jb, wb in ((ib0, 1 - tb), (ib1, tb)):
            for j2, w2 in ((i20, 1 - t2), (i21, t2)):
                for j3, w3 in ((i30, 1 - t3), (i31, t3)):
                    wt = wa * wb * w2 * w3
                    vals = field[ja, jb, j2, j3]
                    # zero-weight corners may sit outside the mask
                    vals = np.where(wt.reshape(wt.shape + (1,) * extra) == 0, 0.0, vals)
                    out = out + wt.reshape(wt.shape + (1,) * extra) * vals
    return out


def interpolate_surface(grid, field, s, x2, x3):
    """Linear interpolation of a D^w field at (s = |x1|, x2, x3)."""
    i0, i1, t = _axis_weights(s, 0.0, 0.5 * grid.h, grid.N + 1, False, "x1")
    ht = grid.spec.h_trans
    i20, i21, t2 = _axis_weights(x2, grid.x2[0], ht, len(grid.x2), grid.periodic, "x2")
    i30, i31, t3 = _axis_weights(x3, grid.x3[0], ht, len(grid.x3), grid.periodic, "x3")
    out = 0.0
    extra = field.ndim - 3
    for j, w in ((i0, 1 - t), (i1, t)):
        for j2, w2 in ((i20, 1 - t2), (i21, t2)):
            for j3, w3 in ((i30, 1 - t3), (i31, t3)):
                wt = w * w2 * w3
                out = out + wt.reshape(wt.shape + (1,) * extra) * field[j, j2, j3]
    return out


def interpolate_gamma(grid, field, x2, x3):
    """Bilinear interpolation of a (n2, n3, ...) field on Gamma."""
    ht = grid.spec.h_trans
    i20, i21, t2 = _axis_weights(x2, grid.x2[0], ht, len(grid.x2), grid.periodic, "x2")
    i30, i31, t3 = _axis_weights(x3, grid.x3[0], ht, len(grid.x3), grid.periodic, "x3")
    out = 0.0
    extra = field.ndim - 2
    for j2, w2 in ((i20, 1 - t2), (i21, t2)):
        for j3, w3 in ((i30, 1 - t3), (i31, t3)):
            wt = w2 * w3
            out = out + wt.reshape(wt.shape + (1,) * extra) * field[j2, j3]
    return out


# --- the cone integral -------------------------------------------------------

@dataclass
class Quadrature:
    n_mu: int = 12
    n_phi: int = 16
    n_lam: int = 12
    n_theta: int = 32

    def doubled(self):
        return Quadrature(2 * self.n_mu, 2 * self.n_phi, 2 * self.n_lam, 2 * self.n_theta)


def _sphere_nodes(c, q):
    """Gauss-Legendre in mu on [-1, c] and [c, 1], trapezoid in azimuth.

    The polar axis is x1, so the landing surface switches exactly at mu = c.
    """
    x, w = np.polynomial.legendre.leggauss(q.n_mu)
    mus, wts, side = [], [], []
    for lo, hi, sd in ((-1.0, c, 2), (c, 1.0, 1)):
        if hi - lo <= 0:
            continue
        mus.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
        side.append(np.full(q.n_mu, sd))
    mu = np.concatenate(mus)
    wmu = np.concatenate(wts)
    side = np.concatenate(side)
    phi = 2 * np.pi * np.arange(q.n_phi) / q.n_phi
    wphi = np.full(q.n_phi, 2 * np.pi / q.n_phi)
    MU, PH = np.meshgrid(mu, phi, indexing="ij")
    W = wmu[:, None] * wphi[None, :]
    SD = np.broadcast_to(side[:, None], MU.shape)
    st = np.sqrt(np.clip(1 - MU**2, 0, None))
    P = np.stack([MU, st * np.cos(PH), st * np.sin(PH)], axis=-1)
    return P.reshape(-1, 3), W.ravel(), SD.ravel()


def _surface_slopes(grid, data):
    """d phi^w / ds on each D^w lattice (s = |x1|, spacing h/2)."""
    return {w: diff_axis(data.phi[w], 0, 0.5 * grid.h) for w in (1, 2)}


def apex_value(grid, data, apex, source, q, slopes=None):
    """u at one apex from the cone integral. `source(X)` returns F = -f at
    spacetime points (or None for F = 0)."""
    t0, x10 = apex[0], apex[1]
    a0, b0 = t0 - x10, t0 + x10
    if slopes is None:
        slopes = _surface_slopes(grid, data)
    c = -x10 / t0
    P, W, SD = _sphere_nodes(c, q)
    psi, _ = _psi_from_p1(t0, x10, P[:, 0])
    # boundary density on S
    hit = apex[None, 1:] + psi[:, None] * P
    total = 0.0
    for w in (1, 2):
        sel = SD == w
        if not sel.any():
            continue
        s = np.abs(hit[sel, 0])
        G = interpolate_surface(grid, slopes[w], s, hit[sel, 1], hit[sel, 2])
        denom = 1 + P[sel, 0] if w == 1 else 1 - P[sel, 0]
        total = total + np.einsum("k,k...->...", W[sel] * 2 * psi[sel] / denom, G)
    total = total / (4 * np.pi)
    # volume term
    if source is not None:
        xl, wl = np.polynomial.legendre.leggauss(q.n_lam)
        lam = 0.5 * psi[:, None] * (xl[None, :] + 1)
        wlam = 0.5 * psi[:, None] * wl[None, :]
        X = np.empty(lam.shape + (4,))
        X[..., 0] = t0 - lam
        X[..., 1:] = apex[None, None, 1:] + lam[..., None] * P[:, None, :]
        F = source(X)
        vol = np.einsum("k,kl,kl...->...", W, wlam * lam, F)
        total = total + vol / (4 * np.pi)
    # the circle where the cone meets Gamma
    rho = np.sqrt(max(a0 * b0, 0.0))
    th = 2 * np.pi * np.arange(q.n_theta) / q.n_theta
    ring = interpolate_gamma(grid, data.phi[1][0], apex[2] + rho * np.cos(th), apex[3] + rho * np.sin(th))
    total = total + ring.mean(axis=0)
    return total


def apex_mask(grid):
    """Interior wedge nodes (a > 0, b > 0) used as apices."""
    m = grid.mask.copy()
    m[0, :] = False
    m[:, 0] = False
    return m


def kirchhoff_apply(grid, data, sys, u, q=None):
    """One application of the cone-integral map to a candidate field u.

    Data nodes keep the Goursat data; every interior node is recomputed.
    The candidate and its gradient are interpolated along the rays.
    """
    q = q or Quadrature()
    slopes = _surface_slopes(grid, data)
    du = grid.grad(u)

    def source(X):
        uu = interpolate_wedge(grid, u, X)
        dd = interpolate_wedge(grid, np.nan_to_num(du), X)
        return -sys.source(X, uu, dd)

    out = np.array(u, dtype=float, copy=True)
    out[0, :] = data.phi[1]
    out[:, 0] = data.phi[2]
    Xg = grid.coords()
    for ia, ib in np.argwhere(apex_mask(grid)):
        for i2 in range(len(grid.x2)):
            for i3 in range(len(grid.x3)):
                try:
                    out[ia, ib, i2, i3] = apex_value(grid, data, Xg[ia, ib, i2, i3], source, q, slopes)
                except DomainCoverageError as exc:
                    apex = np.array2string(Xg[ia, ib, i2, i3], precision=4)
                    raise DomainCoverageError(f"{exc} (apex {apex})") from exc
    return out


def quadrature_error(grid, data, sys, u, q=None):
    """sup |Theta_q u - Theta_2q u| over the apices."""
    q = q or Quadrature()
    a = kirchhoff_apply(grid, data, sys, u, q)
    b = kirchhoff_apply(grid, data, sys, u, q.doubled())
    return float(np.nanmax(np.abs(a - b)))


# --- Picard ------------------------------------------------------------------

def data_extension(grid, data):
    """Phi[ia, ib] = phi^1[ib] + phi^2[ia] - phi(Gamma): the free-wave extension."""
    U = data.phi[1][None, :] + data.phi[2][:, None] - data.phi[1][0][None, None]
    return np.where(grid.mask[:, :, None, None, None], U, np.nan)


@dataclass
class IterationTrace:
    d: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    verdict: str = "running"
    ball_radius: float = None
    ball_ok: bool = None
    final_residual: float = None


def picard_iterate(grid, data, sys, tol=1e-12, max_iter=30, l=None, q=None):
    """u_{k+1} = Theta(u_k) from the data extension.

    Returns (u, trace). Five consecutive ratios >= 1 end the run with a
    divergence verdict; it is reported, not raised.
    """
    q = q or Quadrature()
    Phi = data_extension(grid, data)
    u = kirchhoff_apply(grid, data, sys, Phi, q)
    tr = IterationTrace()
    streak = 0
    for _ in range(max_iter):
        un = kirchhoff_apply(grid, data, sys, u, q)
        dk = float(np.nanmax(np.abs(un - u)))
        u = un
        tr.d.append(dk)
        if len(tr.d) > 1:
            r = dk / tr.d[-2] if tr.d[-2] > 0 else 0.0
            tr.ratios.append(r)
            streak = streak + 1 if r >= 1 else 0
        if dk <= tol:
            tr.verdict = "converged"
            break
        if streak >= 5:
            tr.verdict = "diverged"
            break
    else:
        tr.verdict = "max_iter"
    tr.final_residual = tr.d[-1]
    tr.ball_radius = float(np.nanmax(np.abs(u - Phi)))
    if l is not None:
        tr.ball_ok = bool(tr.ball_radius <= l)
    return u, tr
