"""Characteristic box-scheme evolution of Goursat problems on the wedge.

The unknown at node (ia, ib) is obtained from the equation written at the
centre of the cell with corners (ia-1, ib), (ia, ib-1), (ia-1, ib-1) and
(ia, ib). In null coordinates the principal part reads

    2(A00 - A11) u_ab + (A00 - 2A01 + A11) u_aa + (A00 + 2A01 + A11) u_bb
    + 2(A0k - A1k) u_ak + 2(A0k + A1k) u_bk + Akl u_kl,

so on characteristic data only the cross derivative is stiff. All cells of
an anti-diagonal front ia + ib = s are solved together.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .einstein import EnergyTrace, MetricField, einstein_reduced_system, gauge_vector, sym_from_vec
from .errors import DataError, GoursatError, HyperbolicityLossError, StepFailure
from .geometry import WedgeSpec, build_wedge_grid, characteristic_residual
from .stencils import diff_axis, run_trapezoid_weights, trapezoid_weights
from .system import GoursatData, signature_ok


@dataclass
class EvolutionState:
    grid: object
    U: np.ndarray
    filled: np.ndarray
    front: int = 1
    diagnostics: list = field(default_factory=list)

    @classmethod
    def from_data(cls, data):
        grid = data.grid
        n = data.n
        U = np.full(grid.shape + (n,), np.nan)
        U[0, :] = data.phi[1]
        U[:, 0] = data.phi[2]
        filled = np.zeros((grid.N + 1, grid.N + 1), dtype=bool)
        filled[0, :] = True
        filled[:, 0] = True
        return cls(grid, U, filled & grid.mask)


@dataclass
class EvolutionResult:
    state: EvolutionState
    residual: np.ndarray = None
    gauge_trace: np.ndarray = None
    energy_trace: EnergyTrace = None
    timings: dict = field(default_factory=dict)

    @property
    def u(self):
        return self.state.U


# --- one front ---------------------------------------------------------------

def front_cells(grid, s):
    ia = np.arange(max(1, s - grid.N), min(s - 1, grid.N) + 1)
    ib = s - ia
    keep = grid.mask[ia, ib]
    return ia[keep], ib[keep]


def _dT(arr, k, grid):
    """Transverse derivative of gathered arrays shaped (m, n2, n3, ...)."""
    axis = 1 + k
    if arr.shape[axis] == 1:
        return np.zeros_like(arr)
    return diff_axis(arr, axis, grid.spec.h_trans, periodic=grid.periodic)


def _second_a(U, h, N, mask, ia, ib):
    """u_aa at the cell centre and the weight of U[ia, ib] in it. Applied to
    the transposed field it gives u_bb."""
    h2 = h**2

    def S(i, j):
        i = np.maximum(i, 1)
        j = np.maximum(j, 0)
        ip = np.minimum(i + 1, N)
        return (U[ip, j] - 2 * U[i, j] + U[i - 1, j]) / h2

    def level(j):
        ext = 1.5 * S(ia - 1, j) - 0.5 * S(ia - 2, j)
        return np.where((ia >= 3)[:, None, None, None], ext, S(ia - 1, j))

    two = 0.5 * (level(ib) + level(ib - 1))
    # ia = 1: a lagged second difference two levels down in b
    jl = np.maximum(ib - 2, 0)
    lag_ok = (ib >= 2) & mask[np.minimum(2, N), jl]
    lag = np.where(lag_ok[:, None, None, None], S(np.ones_like(ia), jl), 0.0)
    out = np.where((ia >= 2)[:, None, None, None], two, lag)
    weight = np.where(ia >= 3, 0.75, np.where(ia == 2, 0.5, 0.0)) / h2
    return out, weight


def cell_residual(sys, grid, U, ia, ib):
    """Equation residual at the centres of cells (ia, ib), and the
    derivative of that residual with respect to U[ia, ib] (frozen A)."""
    h = grid.h
    uX, uA, uB, uC = U[ia, ib], U[ia - 1, ib], U[ia, ib - 1], U[ia - 1, ib - 1]
    uc = 0.25 * (uX + uA + uB + uC)
    ua = ((uX - uA) + (uB - uC)) / (2 * h)
    ub = ((uX - uB) + (uA - uC)) / (2 * h)
    uab = (uX - uA - uB + uC) / h**2
    uaa, waa = _second_a(U, grid.h, grid.N, grid.mask, ia, ib)
    ubb, wbb = _second_a(np.swapaxes(U, 0, 1), grid.h, grid.N, grid.mask.T, ib, ia)

    ac = (ia - 0.5) * grid.h
    bc = (ib - 0.5) * grid.h
    xc = np.empty((len(ia), len(grid.x2), len(grid.x3), 4))
    xc[..., 0] = (0.5 * (ac + bc))[:, None, None]
    xc[..., 1] = (0.5 * (bc - ac))[:, None, None]
    xc[..., 2] = grid.x2[None, :, None]
    xc[..., 3] = grid.x3[None, None, :]

    A = sys.coefficients(xc, uc)
    c_ab = 2 * (A[..., 0, 0] - A[..., 1, 1])
    c_aa = A[..., 0, 0] - 2 * A[..., 0, 1] + A[..., 1, 1]
    c_bb = A[..., 0, 0] + 2 * A[..., 0, 1] + A[..., 1, 1]

    corners = (uX, uA, uB, uC)
    dk = [[_dT(c, k, grid) for c in corners] for k in range(2)]
    duc = np.empty(uc.shape + (4,))
    duc[..., 0] = ua + ub
    duc[..., 1] = ub - ua
    R = c_ab[..., None] * uab + c_aa[..., None] * uaa + c_bb[..., None] * ubb
    for k in range(2):
        dX, dA, dB, dC = dk[k]
        duc[..., 2 + k] = 0.25 * (dX + dA + dB + dC)
        uak = ((dX - dA) + (dB - dC)) / (2 * h)
        ubk = ((dX - dB) + (dA - dC)) / (2 * h)
        m = 2 + k
        R = R + (2 * (A[..., 0, m] - A[..., 1, m]))[..., None] * uak
        R = R + (2 * (A[..., 0, m] + A[..., 1, m]))[..., None] * ubk
        for l in range(2):
            dkl = 0.25 * sum(_dT(d, l, grid) for d in dk[k])
            R = R + A[..., m, 2 + l][..., None] * dkl
    R = R + sys.source(xc, uc, duc)
    cX = c_ab / h**2 + c_aa * waa[:, None, None] + c_bb * wbb[:, None, None]
    return R, cX, A


def step_front(sys, state, s, tol=1e-10, max_sweeps=50):
    """Fill every cell on front s by frozen-coefficient fixed-point sweeps."""
    grid, U = state.grid, state.U
    ia, ib = front_cells(grid, s)
    if len(ia) == 0:
        state.front = s
        return state
    if not (state.filled[ia - 1, ib].all() and state.filled[ia, ib - 1].all()
            and state.filled[ia - 1, ib - 1].all()):
        raise StepFailure("neighbours of the front are not filled", location=(s,))
    U[ia, ib] = U[ia - 1, ib] + U[ia, ib - 1] - U[ia - 1, ib - 1]
    history = []
    growth = 0
    converged = False
    for sweep in range(1, max_sweeps + 1):
        R, cX, A = cell_residual(sys, grid, U, ia, ib)
        if sweep == 1:
            ok = signature_ok(A)
            if not ok.all():
                bad = np.argwhere(~ok)[0]
                loc = (int(ia[bad[0]]), int(ib[bad[0]]), int(bad[1]), int(bad[2]))
                raise HyperbolicityLossError(f"coefficients lose Lorentzian signature at node {loc}",
                                             location=loc, diagnostics={"A": A[tuple(bad)]})
        if not np.all(np.isfinite(R)) or np.any(cX == 0):
            raise StepFailure(f"non-finite residual on front {s}", location=(s,))
        delta = R / cX[..., None]
        U[ia, ib] -= delta
        rmax = float(np.abs(delta).max())
        history.append(rmax)
        if len(history) > 1 and history[-1] > history[-2]:
            growth += 1
        else:
            growth = 0
        if growth >= 5:
            raise StepFailure(f"inner iteration diverging on front {s}", location=(s,),
                              diagnostics={"history": history})
        scale = 1.0 + float(np.abs(U[ia, ib]).max())
        if rmax <= tol * scale:
            converged = True
            break
    if not converged:
        raise StepFailure(f"inner iteration did not converge on front {s} in {max_sweeps} sweeps",
                          location=(s,), diagnostics={"history": history})
    state.filled[ia, ib] = True
    state.front = s
    vals = U[ia, ib]
    state.diagnostics.append({"front": s, "t": 0.5 * s * grid.h, "cells": int(len(ia)), "sweeps": sweep,
                              "last_update": history[-1], "max_u": float(np.abs(vals).max())})
    return state


def step(state, sys, **kw):
    """Advance by one anti-diagonal front."""
    return step_front(sys, state, state.front + 1, **kw)


# --- monitors ----------------------------------------------------------------

def residual_field(sys, grid, U):
    """A(x, u) d2 u + f(x, u, du) with independent node stencils (NaN off mask)."""
    du = grid.grad(U)
    ddu = grid.grad(du)
    X = grid.coords()
    m = grid.mask[:, :, None, None, None]
    # off-mask nodes get a harmless valid state; they are discarded below
    Uf = np.where(m, U, U[0, 0])
    duf = np.where(m[..., None], du, 0.0)
    A = sys.coefficients(X, Uf)
    R = np.einsum("...lm,...rlm->...r", A, ddu) + sys.source(X, Uf, duf)
    return np.where(grid.mask[:, :, None, None, None], R, np.nan)


def front_integral(grid, q):
    """Integral over each slice G_tau (tau = s h/2) of a node density q."""
    tw = (trapezoid_weights(len(grid.x2), grid.spec.h_trans, grid.periodic)[:, None]
          * trapezoid_weights(len(grid.x3), grid.spec.h_trans, grid.periodic)[None, :])
    out = np.zeros(grid.N + 1)
    for s in range(grid.N + 1):
        ia = np.arange(s + 1)
        ib = s - ia
        wts = run_trapezoid_weights(grid.mask[ia, ib], grid.h)
        out[s] = float(np.sum(wts[:, None, None] * np.nan_to_num(q[ia, ib]) * tw))
    return out


def front_max(grid, q):
    out = np.zeros(grid.N + 1)
    for s in range(grid.N + 1):
        ia = np.arange(s + 1)
        ib = s - ia
        keep = grid.mask[ia, ib]
        vals = np.abs(q[ia[keep], ib[keep]])
        out[s] = float(np.nanmax(vals)) if vals.size else 0.0
    return out


def einstein_monitors(grid, U):
    g = sym_from_vec(np.where(grid.mask[:, :, None, None, None], U, U[0, 0]))
    mf = MetricField(g, grid)
    gam = gauge_vector(mf)
    gauge = front_max(grid, gam)
    K = grid.partial(g, 0)
    dens = 0.5 * np.sum(K**2, axis=(-2, -1))
    E = front_integral(grid, dens)
    tau = 0.5 * grid.h * np.arange(grid.N + 1)
    # tau = 0 is a single node with no extent; the trace starts at the first slice
    trace = EnergyTrace(tau[1:], E[1:])
    return gauge, trace


# --- drivers -----------------------------------------------------------------

def check_data(sys, data, tol=1e-10):
    data.require_corner_compatible()
    for w in (1, 2):
        r = characteristic_residual(sys, data.phi[w], data.grid, w)
        if np.abs(r).max() > tol:
            raise DataError(f"data on S^{w} are not characteristic (max residual {np.abs(r).max():.3e})")


def evolve(sys, data, check=True, monitors=None, checkpoint=None, checkpoint_every=0,
           resume=None, tol=1e-10, max_sweeps=50):
    """Fill the wedge of data.grid front by front.

    `monitors` defaults to the Einstein gauge/energy monitors when the system
    has 10 unknowns named as the reduced vacuum system. Checkpoints are
    .npz dumps of the full state written every `checkpoint_every` fronts.
    """
    t0 = time.perf_counter()
    if check:
        check_data(sys, data)
    grid = data.grid
    if resume is not None:
        state = load_checkpoint(resume, grid)
    else:
        state = EvolutionState.from_data(data)
    for s in range(state.front + 1, grid.N + 1):
        try:
            step_front(sys, state, s, tol=tol, max_sweeps=max_sweeps)
        except StepFailure as exc:
            exc.diagnostics.setdefault("frontier", s)
            exc.diagnostics.setdefault("state", state)
            raise
        if checkpoint is not None and checkpoint_every and s % checkpoint_every == 0:
            save_checkpoint(checkpoint, state)
    t1 = time.perf_counter()
    res = EvolutionResult(state, timings={"evolve": t1 - t0})
    res.residual = residual_field(sys, grid, state.U)
    if monitors is None:
        monitors = sys.name.startswith("einstein")
    if monitors:
        res.gauge_trace, res.energy_trace = einstein_monitors(grid, state.U)
    res.timings["monitors"] = time.perf_counter() - t1
    return res


def save_checkpoint(path, state):
    np.savez(path, U=state.U, filled=state.filled, front=state.front)


def load_checkpoint(path, grid):
    with np.load(path) as z:
        U = z["U"]
        if U.shape[:4] != grid.shape:
            raise DataError(f"checkpoint shape {U.shape[:4]} does not match grid {grid.shape}")
        return EvolutionState(grid, U.copy(), z["filled"].copy(), int(z["front"]))


def evolve_einstein_plane_symmetric(data, **kw):
    """Reduced vacuum evolution for data independent of x2, x3."""
    for w in (1, 2):
        phi = data.phi[w]
        if np.abs(phi - phi[:, :1, :1]).max() > 1e-12:
            raise DataError("plane-symmetric evolution needs data independent of x2, x3")
    return evolve(einstein_reduced_system(), data, monitors=True, **kw)


# --- semi-global extent ------------------------------------------------------

@dataclass
class ExtentEntry:
    T: float
    f: float
    status: str
    attempts: list = field(default_factory=list)
    K0: float = None


@dataclass
class ExtentMap:
    entries: list = field(default_factory=list)

    def pairs(self):
        return [(e.T, e.f) for e in self.entries]


def derivative_bound(grid, U, order=4):
    """max over valid nodes of |u|, |du|, ..., |d^order u| (composed stencils)."""
    best = float(np.nanmax(np.abs(U)))
    layer = [U]
    for _ in range(order):
        layer = [grid.partial(f, mu) for f in layer for mu in range(4)]
        for f in layer:
            v = np.abs(np.where(grid.mask[:, :, None, None, None], f, 0.0))
            best = max(best, float(np.nanmax(v)))
    return best


def semi_global_extent(sys, make_data, T_list, sigma0, h, B_bounds=((0.0, 1.0), (0.0, 1.0)),
                       h_trans=1.0, periodic=True, derivative_order=2):
    """Largest sigma (by halving from sigma0, down to 4h) for which the
    evolution on Y_{T, sigma} succeeds, for each T."""
    out = ExtentMap()
    sigma_min = 4 * h
    for T in T_list:
        sigma = sigma0
        entry = ExtentEntry(T=T, f=0.0, status="failed")
        while sigma >= sigma_min - 1e-12:
            spec = WedgeSpec(T_max=T, sigma=sigma, B_bounds=B_bounds, h_null=h, h_trans=h_trans, periodic=periodic)
            grid = build_wedge_grid(spec)
            try:
                res = evolve(sys, make_data(grid))
            except GoursatError as exc:
                entry.attempts.append((sigma, type(exc).__name__))
                sigma *= 0.5
                continue
            entry.attempts.append((sigma, "ok"))
            entry.f = sigma
            entry.status = "converged" if sigma == sigma0 else "shrunk"
            entry.K0 = derivative_bound(grid, res.u, derivative_order)
            break
        out.entries.append(entry)
    return out
