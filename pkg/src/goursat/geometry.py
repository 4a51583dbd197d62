"""Wedge domain, null boundary surfaces and their lattices.

The wedge is covered by a uniform lattice in double-null coordinates
a = x0 - x1, b = x0 + x1 (both >= 0) tensored with a transverse lattice on
the rectangle B. Surface index w is 1 or 2: S^1 is {a = 0} (x0 = x1) and
S^2 is {b = 0} (x0 = -x1); they meet on the corner Gamma {a = b = 0}.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MissingDataError
from .stencils import _shift, diff_axis

_CELL_TOL = 1e-9


def _whole_cells(extent, h, name):
    n = extent / h
    k = int(round(n))
    if k < 1 or abs(n - k) > _CELL_TOL * max(1.0, n):
        raise ConfigError(f"{name}: spacing {h} does not divide extent {extent} into whole cells")
    return k


@dataclass(frozen=True)
class WedgeSpec:
    T_max: float
    sigma: float
    B_bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    h_null: float = 0.0625
    h_trans: float = 1.0
    periodic: bool = True

    def validate(self):
        problems = []
        if not self.T_max > 0:
            problems.append(f"T_max must be > 0 (got {self.T_max})")
        if not self.sigma > 0:
            problems.append(f"sigma must be > 0 (got {self.sigma})")
        if not self.h_null > 0 or not self.h_trans > 0:
            problems.append("grid spacings must be > 0")
        for k, (lo, hi) in enumerate(self.B_bounds):
            if not hi > lo:
                problems.append(f"B bounds for x{k + 2} are degenerate: [{lo}, {hi}]")
        if problems:
            raise ConfigError(problems)
        _whole_cells(self.T_max, self.h_null, "T_max")
        for k, (lo, hi) in enumerate(self.B_bounds):
            _whole_cells(hi - lo, self.h_trans, f"B[x{k + 2}]")


@dataclass(frozen=True)
class CausalBounds:
    C: float
    M: float
    B: float
    l: float = None

    def __post_init__(self):
        if not (self.C > 0 and self.M > 0 and self.B > 0):
            raise ConfigError("causal bounds C, M, B must be strictly positive")


@dataclass
class WedgeGrid:
    """Discrete wedge. Fields live on arrays shaped (N+1, N+1, n2, n3, ...)
    indexed by (i_a, i_b, i_2, i_3)."""

    spec: WedgeSpec
    h: float
    N: int
    x2: np.ndarray
    x3: np.ndarray
    periodic: bool
    mask: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return (self.N + 1, self.N + 1, len(self.x2), len(self.x3))

    @property
    def h_trans(self):
        return self.spec.h_trans

    @property
    def area(self):
        (l2, u2), (l3, u3) = self.spec.B_bounds
        return (u2 - l2) * (u3 - l3)

    @property
    def a(self):
        return self.h * np.arange(self.N + 1)

    b = a

    @property
    def s1_mask(self):
        m = np.zeros((self.N + 1, self.N + 1), dtype=bool)
        m[0, :] = True
        return m & self.mask

    @property
    def s2_mask(self):
        m = np.zeros((self.N + 1, self.N + 1), dtype=bool)
        m[:, 0] = True
        return m & self.mask

    @property
    def gamma_mask(self):
        m = np.zeros((self.N + 1, self.N + 1), dtype=bool)
        m[0, 0] = True
        return m

    def null_coords(self):
        A, B = np.meshgrid(self.a, self.b, indexing="ij")
        return A, B

    def coords(self):
        """Cartesian coordinates of every node, shape (N+1, N+1, n2, n3, 4)."""
        A, Bn = self.null_coords()
        x0 = 0.5 * (A + Bn)
        x1 = 0.5 * (Bn - A)
        sh = self.shape
        X = np.empty(sh + (4,))
        X[..., 0] = x0[:, :, None, None]
        X[..., 1] = x1[:, :, None, None]
        X[..., 2] = self.x2[None, None, :, None]
        X[..., 3] = self.x3[None, None, None, :]
        return X

    def surface_x1(self, w):
        """x1 coordinates of the D^w lattice, ordered outward from Gamma."""
        s = 0.5 * self.h * np.arange(self.N + 1)
        return s if w == 1 else -s

    def surface_coords(self, w):
        """Coordinates (x1, x2, x3) of the D^w lattice, shape (N+1, n2, n3, 3)."""
        x1 = self.surface_x1(w)
        X = np.empty((self.N + 1, len(self.x2), len(self.x3), 3))
        X[..., 0] = x1[:, None, None]
        X[..., 1] = self.x2[None, :, None]
        X[..., 2] = self.x3[None, None, :]
        return X

    def surface_spacetime_coords(self, w):
        Y = self.surface_coords(w)
        X = np.empty(Y.shape[:-1] + (4,))
        X[..., 0] = (-1) ** (w - 1) * Y[..., 0]
        X[..., 1:] = Y
        return X

    # --- Cartesian derivatives on the null lattice -------------------------

    def _d_trans(self, f, k):
        axis = 2 + k
        if f.shape[axis] == 1:
            return np.zeros_like(f)
        return diff_axis(f, axis, self.spec.h_trans, valid=None, periodic=self.periodic)

    def _d_null(self, f, axis):
        """d/da (axis 0) or d/db (axis 1). Nodes without a second-order stencil
        along `axis` (the staircase tips) take the derivative extrapolated
        linearly along the other null axis, keeping composed second
        derivatives bounded."""
        d = diff_axis(f, axis, self.h, valid=self.mask)
        m = self.mask
        p1, p2 = _shift(m, 1, axis, False), _shift(m, 2, axis, False)
        m1, m2 = _shift(m, -1, axis, False), _shift(m, -2, axis, False)
        good = m & ((p1 & m1) | (p1 & p2) | (m1 & m2))
        low = m & ~good
        if not low.any():
            return d
        other = 1 - axis
        extra = d.ndim - 2
        for k in (1, 2, 3):
            gk, gk1 = _shift(good, -k, other, False), _shift(good, -k - 1, other, False)
            fix = low & gk & gk1
            if not fix.any():
                continue
            dk, dk1 = _shift(d, -k, other, np.nan), _shift(d, -k - 1, other, np.nan)
            fixb = np.broadcast_to(fix.reshape(fix.shape + (1,) * extra), d.shape)
            d = np.where(fixb, (k + 1) * dk - k * dk1, d)
            low = low & ~fix
        return d

    def partial(self, f, mu):
        """Cartesian partial derivative of a wedge field (NaN off-mask)."""
        f = np.asarray(f, dtype=float)
        if mu in (0, 1):
            fa = self._d_null(f, 0)
            fb = self._d_null(f, 1)
            return fa + fb if mu == 0 else fb - fa
        return self._d_trans(f, mu - 2)

    def grad(self, f):
        return np.stack([self.partial(f, mu) for mu in range(4)], axis=-1)


def build_wedge_grid(spec):
    spec.validate()
    N = 2 * _whole_cells(spec.T_max, spec.h_null, "T_max")
    h = spec.h_null
    axes = []
    for lo, hi in spec.B_bounds:
        n = _whole_cells(hi - lo, spec.h_trans, "B")
        pts = lo + spec.h_trans * np.arange(n + 1)
        axes.append(pts[:-1] if spec.periodic else pts)
    ia, ib = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    # x0 <= T  <=>  a + b <= 2T ;  x0 <= sqrt(x1^2 + sigma^2)  <=>  a b <= sigma^2
    mask = (ia + ib <= N) & (ia * ib * h * h <= spec.sigma**2 * (1 + 1e-12))
    return WedgeGrid(spec=spec, h=h, N=N, x2=axes[0], x3=axes[1], periodic=spec.periodic, mask=mask)


def in_wedge(x, spec):
    """Continuum membership in Y_{T,sigma} for points x (..., 4)."""
    x = np.asarray(x, dtype=float)
    x0, x1 = x[..., 0], x[..., 1]
    return (np.abs(x1) <= x0) & (x0 <= spec.T_max) & (x0 <= np.sqrt(x1**2 + spec.sigma**2))


def restrict_to_null(v, w):
    """[v]^w: the values of a wedge field on S^w, ordered outward from Gamma.

    Pure indexing, so the restriction is exact and linear.
    """
    v = np.asarray(v)
    out = v[0, :] if w == 1 else v[:, 0]
    if np.issubdtype(out.dtype, np.floating) and np.isnan(out).any():
        bad = np.argwhere(np.isnan(out.reshape(out.shape[0], -1)).any(axis=1)).ravel()
        raise MissingDataError(f"field undefined on S^{w} nodes {bad.tolist()[:5]}")
    return out.copy()


def surface_partial(grid, fs, i, w):
    """Tangential derivative d/dx^i of a D^w lattice field (i in 1, 2, 3)."""
    fs = np.asarray(fs, dtype=float)
    if i == 1:
        # lattice index increases with |x1|
        sign = 1.0 if w == 1 else -1.0
        return sign * diff_axis(fs, 0, 0.5 * grid.h)
    axis = i - 1
    if fs.shape[axis] == 1:
        return np.zeros_like(fs)
    return diff_axis(fs, axis, grid.spec.h_trans, periodic=grid.periodic)


def restriction_identity_residual(grid, fn, dfn, w):
    """Max-node residual of [d_i g]^w = d_i [g]^w + (-1)^w delta_{1i} [d_0 g]^w.

    `fn(x)` samples a smooth field at points (..., 4) and `dfn(x)` returns its
    exact gradient (..., comps, 4). The surface derivative is discrete, the
    restricted gradient exact; the result measures the surface stencil error.
    """
    X = grid.surface_spacetime_coords(w)
    g_s = fn(X)
    dg = dfn(X)
    res = 0.0
    for i in (1, 2, 3):
        rhs = surface_partial(grid, g_s, i, w)
        if i == 1:
            rhs = rhs + (-1) ** w * dg[..., 0]
        res = max(res, float(np.nanmax(np.abs(dg[..., i] - rhs))))
    return res


def characteristic_residual(sys, phi_w, grid, w):
    """A^00 + 2(-1)^w A^01 + A^11 evaluated on S^w with the data phi^w."""
    X = grid.surface_spacetime_coords(w)
    A = sys.coefficients(X, phi_w)
    return A[..., 0, 0] + 2 * (-1) ** w * A[..., 0, 1] + A[..., 1, 1]


def in_causal_domain(point, bounds):
    x = np.asarray(point, dtype=float)
    x0, x1 = x[..., 0], x[..., 1]
    a = x0 - np.abs(x1)
    near = (a > 0) & (a < bounds.M)
    return (near & (a <= bounds.C * np.abs(x1))) | (near & (a > bounds.C * np.abs(x1)) & (x0 < bounds.B))
