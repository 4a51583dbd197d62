"""Discrete weighted Sobolev-type norms on null surfaces, slices and the wedge.

Surface fields are arrays on the D^w lattice shaped (N+1, n2, n3, comps...),
wedge fields are shaped (N+1, N+1, n2, n3, comps...). Any trailing axes are
treated as components and summed in the squared norm.
"""
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientGridError
from .geometry import restrict_to_null
from .stencils import diff_axis, run_trapezoid_weights, trapezoid_weights


@dataclass
class NormReport:
    values: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    p: int = 0
    notes: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.values[key]

    def rows(self):
        return [(k, v) for k, v in self.values.items()]


def multi_indices(dim, p):
    """All alpha in N^dim with |alpha| <= p, ordered by total degree."""
    out = []
    for order in range(p + 1):
        for combo in itertools.combinations_with_replacement(range(dim), order):
            out.append(tuple(np.bincount(np.array(combo, dtype=int), minlength=dim)))
    return out


def _derivatives(v, p, dim, deriv):
    """{alpha: D^alpha v} built by composing first derivatives."""
    cache = {(0,) * dim: v}
    for alpha in multi_indices(dim, p)[1:]:
        j = next(k for k, a in enumerate(alpha) if a > 0)
        prev = list(alpha)
        prev[j] -= 1
        cache[alpha] = deriv(cache[tuple(prev)], j)
    return cache


def _sum_sq(D, nlead):
    """Sum over multi-indices and components of |D^alpha v|^2, per node."""
    total = 0.0
    for arr in D.values():
        sq = arr**2
        if sq.ndim > nlead:
            sq = sq.reshape(sq.shape[:nlead] + (-1,)).sum(axis=-1)
        total = total + sq
    return total


def _trans_weights(grid):
    w2 = trapezoid_weights(len(grid.x2), grid.spec.h_trans, grid.periodic)
    w3 = trapezoid_weights(len(grid.x3), grid.spec.h_trans, grid.periodic)
    return w2[:, None] * w3[None, :]


# --- null surfaces -----------------------------------------------------------

def _surface_sq(grid, v, p):
    v = np.asarray(v, dtype=float)
    if p > 0 and v.shape[0] < 2:
        raise InsufficientGridError("surface has a single node along x1")
    hs = 0.5 * grid.h

    def deriv(f, j):
        if j == 0:
            return diff_axis(f, 0, hs)
        if f.shape[j] == 1:
            return np.zeros_like(f)
        return diff_axis(f, j, grid.spec.h_trans, periodic=grid.periodic)

    # the sign of d/dx1 on S^2 does not matter for squared norms
    return _sum_sq(_derivatives(v, p, 3, deriv), 3)


def _slice_index(grid, t):
    m = int(round(t / (0.5 * grid.h)))
    if abs(m * 0.5 * grid.h - t) > 1e-9 * max(1.0, abs(t)) or m < 0:
        raise InsufficientGridError(f"t = {t} is not on the surface lattice (step {0.5 * grid.h})")
    if m > grid.N:
        raise InsufficientGridError(f"t = {t} exceeds the surface extent {grid.N * 0.5 * grid.h}")
    return m


def slice_norm(grid, v, p, w, t):
    """||v||_{H^p(Sigma_t^w)} for a D^w lattice field (w only labels the
    surface; the lattice index already runs outward from Gamma)."""
    m = _slice_index(grid, t)
    sq = _surface_sq(grid, v, p)
    return float(np.sqrt(np.sum(sq[m] * _trans_weights(grid))))


def null_surface_norms(grid, v, p, w, t):
    """{'H': ||v||_{H^p(S_t^w)}, 'E': max over slices 0 < tau <= t}."""
    M = _slice_index(grid, t)
    sq = _surface_sq(grid, v, p)
    per_slice = np.einsum("mij,ij->m", sq, _trans_weights(grid))
    if M == 0:
        return {"H": 0.0, "E": 0.0, "slices": per_slice[:1]}
    w1 = trapezoid_weights(M + 1, 0.5 * grid.h)
    H = np.sqrt(np.sum(w1 * per_slice[: M + 1]))
    E = np.sqrt(np.max(per_slice[1 : M + 1]))
    return {"H": float(H), "E": float(E), "slices": np.sqrt(per_slice[: M + 1])}


# --- the wedge ---------------------------------------------------------------

def _wedge_sq(grid, v, p):
    v = np.asarray(v, dtype=float)
    D = _derivatives(v, p, 4, lambda f, j: grid.partial(f, j))
    sq = _sum_sq(D, 4)
    return np.where(grid.mask[:, :, None, None], sq, 0.0)


def slice_profile(grid, sq):
    """H(G_tau)^2 on every front tau_m = m h/2, m = 0..N."""
    N = grid.N
    tw = _trans_weights(grid)
    out = np.zeros(N + 1)
    for s in range(N + 1):
        ia = np.arange(s + 1)
        ib = s - ia
        valid = grid.mask[ia, ib]
        # x1 = (ib - ia) h / 2, spacing h along the front
        wts = run_trapezoid_weights(valid, grid.h)
        vals = np.nan_to_num(sq[ia, ib])
        out[s] = float(np.sum(wts[:, None, None] * vals * tw))
    return out


def wedge_norms(grid, v, p, t):
    """H^p(G_tau) profile, K^p(Y_t), E^p(Y_t).

    The tau integral runs from the first nonzero front tau_1 = h/2; the
    tau = 0 endpoint carries the singular weight and is excluded.
    """
    prof = slice_profile(grid, _wedge_sq(grid, v, p))
    tau = 0.5 * grid.h * np.arange(grid.N + 1)
    M = int(np.floor(t / (0.5 * grid.h) + 1e-9))
    M = min(M, grid.N)
    notes = [f"tau quadrature over fronts 1..{M} (tau_1 = {tau[1] if M >= 1 else 0.0})"]
    if M < 1:
        return {"H_profile": np.sqrt(prof[:1]), "tau": tau[:1], "K": 0.0, "E": 0.0, "notes": notes}
    integrand = prof[1 : M + 1] / tau[1 : M + 1]
    K2 = np.sum(trapezoid_weights(M, 0.5 * grid.h) * integrand) if M > 1 else 0.0
    E = np.sqrt(np.max(integrand))
    return {"H_profile": np.sqrt(prof[: M + 1]), "tau": tau[: M + 1], "K": float(np.sqrt(K2)),
            "E": float(E), "notes": notes}


def time_derivatives(grid, v, kmax):
    """[v, d0 v, ..., d0^kmax v] on the wedge by repeated differencing."""
    out = [np.asarray(v, dtype=float)]
    for _ in range(kmax):
        out.append(grid.partial(out[-1], 0))
    return out


def script_norms(grid, v, p, t, start_k=0):
    """Combined norms with sums over k = start_k..p-1 of ||d0^k v|| in
    H^{2(p-k)-1} (start_k = 1 gives the subscript-one variants)."""
    rep = NormReport(p=p, grid={"h": grid.h, "N": grid.N, "h_trans": grid.spec.h_trans, "t": t})
    wn = wedge_norms(grid, v, p, t)
    rep.notes.extend(wn["notes"])
    rep.values["K(Y_t)"] = wn["K"]
    rep.values["E(Y_t)"] = wn["E"]
    if p == 0:
        warnings.warn("p = 0: script sums are empty", stacklevel=2)
    ks = list(range(start_k, p))
    dv = time_derivatives(grid, v, max(ks) if ks else 0)
    sums = {}
    for w in (1, 2):
        g2 = k2 = e2 = 0.0
        for k in ks:
            q = 2 * (p - k) - 1
            vs = restrict_to_null(dv[k], w)
            g2 += slice_norm(grid, vs, q, w, 0.0) ** 2
            ns = null_surface_norms(grid, vs, q, w, t)
            k2 += ns["H"] ** 2
            e2 += ns["E"] ** 2
        sums[w] = (g2, k2, e2)
        rep.values[f"scriptK(Gamma,S{w})"] = float(np.sqrt(g2))
        rep.values[f"scriptK(S{w}_t)"] = float(np.sqrt(k2))
        rep.values[f"scriptE(S{w}_t)"] = float(np.sqrt(e2))
    rep.values["scriptK(Y_t)"] = float(np.sqrt(wn["K"] ** 2 + sums[1][1] + sums[2][1]))
    rep.values["scriptE(Y_t)"] = float(np.sqrt(wn["E"] ** 2 + sums[1][2] + sums[2][2]))
    if start_k:
        rep.notes.append(f"sums start at k = {start_k}")
    return rep
