"""Quasilinear systems A^{lm}(x, u) d2_{lm} u_r + f_r(x, u, du) = 0 and
validators for their structural hypotheses."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EvaluationError

ETA = np.diag([1.0, -1.0, -1.0, -1.0])


def _const(value):
    value = np.asarray(value, dtype=float)

    def ev(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(value, x.shape[:-1] + value.shape).copy()

    return ev


def zero_source(n):
    def f(x, u, du):
        return np.zeros(np.shape(u))

    return f


@dataclass
class QuasilinearSystem:
    """Coefficients A = sum_m A1[m](x) u_m + A2(x), or a raw evaluator A(x, u).

    Evaluators are vectorised: x is (..., 4), u is (..., n) and du is
    (..., n, 4) with the derivative index last.
    """

    n: int
    A1: object = None
    A2: object = None
    f: object = None
    A_raw: object = None
    ref_x: np.ndarray = field(default_factory=lambda: np.zeros(4))
    ref_u: np.ndarray = None
    name: str = "custom"

    def __post_init__(self):
        if self.A2 is None:
            self.A2 = _const(ETA)
        elif not callable(self.A2):
            self.A2 = _const(self.A2)
        if self.A1 is not None and not callable(self.A1):
            self.A1 = _const(self.A1)
        if self.f is None:
            self.f = zero_source(self.n)
        if self.ref_u is None:
            self.ref_u = np.zeros(self.n)

    def coefficients(self, x, u):
        return assemble_coefficients(self, x, u)

    def source(self, x, u, du):
        try:
            out = np.asarray(self.f(x, u, du), dtype=float)
        except (ValueError, TypeError, FloatingPointError) as exc:
            raise EvaluationError(f"{self.name}: source evaluation failed: {exc}") from exc
        return np.broadcast_to(out, np.shape(u)).copy()


def assemble_coefficients(sys, x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    try:
        if sys.A_raw is not None:
            return np.asarray(sys.A_raw(x, u), dtype=float)
        A = np.asarray(sys.A2(x), dtype=float)
        if sys.A1 is not None:
            A = A + np.einsum("...mlk,...m->...lk", sys.A1(x), u)
        return A
    except (ValueError, TypeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise EvaluationError(f"{sys.name}: coefficient evaluation failed: {exc}") from exc


@dataclass
class SignatureVerdict:
    ok: bool
    a00: float
    spatial_eigenvalues: np.ndarray
    witness: float = None


def verify_signature(A):
    """(+,-,-,-): A^00 > 0 and the spatial block negative definite."""
    A = np.asarray(A, dtype=float)
    ev = np.linalg.eigvalsh(A[1:, 1:])
    ok = bool(A[0, 0] > 0 and np.all(ev < 0))
    witness = None
    if not ok:
        witness = float(A[0, 0]) if A[0, 0] <= 0 else float(ev.max())
    return SignatureVerdict(ok, float(A[0, 0]), ev, witness)


def signature_ok(A):
    """Vectorised signature test over leading axes."""
    A = np.asarray(A, dtype=float)
    ev = np.linalg.eigvalsh(A[..., 1:, 1:])
    return (A[..., 0, 0] > 0) & np.all(ev < 0, axis=-1)


@dataclass
class LinearityReport:
    passed: bool
    max_second_difference: float
    scale: float
    worst: dict = field(default_factory=dict)


def _sample_box(rng, box, count):
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    return lo + (hi - lo) * rng.random((count, lo.size))


def check_G0_linearity(sys, box_x, box_u, delta=0.1, samples=64, seed=0):
    """Second differences of A(x, u) in the unknowns; zero iff affine in u."""
    rng = np.random.default_rng(seed)
    X = _sample_box(rng, box_x, samples)
    U = _sample_box(rng, box_u, samples)
    worst, scale, where = 0.0, 0.0, {}
    eye = np.eye(sys.n)
    for m in range(sys.n):
        for k in range(m, sys.n):
            em, ek = delta * eye[m], delta * eye[k]
            A00 = sys.coefficients(X, U)
            d2 = (sys.coefficients(X, U + em + ek) - sys.coefficients(X, U + em)
                  - sys.coefficients(X, U + ek) + A00)
            scale = max(scale, float(np.abs(A00).max()))
            mag = float(np.abs(d2).max())
            if mag > worst:
                worst, where = mag, {"m": m, "k": k}
    scale = max(scale, 1.0)
    return LinearityReport(worst <= 1e-10 * scale, worst, scale, where)


def surface_substitution(w, x1, K, tangential):
    """Full gradient on S^w from [d_0 u]^w = K and tangential d_i[u]^w.

    tangential has shape (..., n, 3); returns (..., n, 4).
    """
    du = np.empty(K.shape + (4,))
    du[..., 0] = K
    du[..., 1:] = tangential
    du[..., 1] = du[..., 1] + (-1) ** w * K
    return du


def check_G1_linearity(sys, w, box_x, box_u, box_du, delta=0.1, samples=64, seed=0):
    """Second differences of f on S^w in the transverse slots [d_0 u_s]^w.

    box_x bounds (x1, x2, x3); box_du bounds the 4n values (K, tangential).
    """
    rng = np.random.default_rng(seed)
    n = sys.n
    Y = _sample_box(rng, box_x, samples)
    X = np.column_stack([(-1) ** (w - 1) * Y[:, 0], Y])
    U = _sample_box(rng, box_u, samples)
    D = _sample_box(rng, box_du, samples).reshape(samples, n, 4)
    K0, tang = D[..., 0], D[..., 1:]
    eye = np.eye(n)

    def F(K):
        return sys.source(X, U, surface_substitution(w, X[:, 1], K, tang))

    worst, scale, where = 0.0, 0.0, {}
    base = F(K0)
    scale = max(float(np.abs(base).max()), 1.0)
    for m in range(n):
        for k in range(m, n):
            em, ek = delta * eye[m], delta * eye[k]
            d2 = F(K0 + em + ek) - F(K0 + em) - F(K0 + ek) + base
            mag = float(np.abs(d2).max())
            if mag > worst:
                worst, where = mag, {"m": m, "k": k}
    return LinearityReport(worst <= 1e-10 * scale, worst, scale, where)


def null_directions(count=64):
    """Deterministic null covectors (1, n) with n on a Fibonacci sphere,
    plus the six axis-aligned ones."""
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5**0.5) * i
    n = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    axes = np.vstack([np.eye(3), -np.eye(3)])
    n = np.vstack([axes, n])
    return np.column_stack([np.ones(len(n)), n])


@dataclass
class NullVerdict:
    ok: bool
    max_abs: float
    witness: np.ndarray = None
    witness_value: float = 0.0


def null_condition_check(Q, tol=1e-12):
    Q = np.asarray(Q, dtype=float)
    xi = null_directions()
    vals = np.einsum("ni,ij,nj->n", xi, Q, xi)
    scale = max(1.0, float(np.abs(Q).max()))
    k = int(np.argmax(np.abs(vals)))
    ok = bool(abs(vals[k]) <= tol * scale)
    return NullVerdict(ok, float(abs(vals[k])), None if ok else xi[k], float(vals[k]))


@dataclass
class GoursatData:
    """Goursat data phi^w on the D^w lattices, shape (N+1, n2, n3, n) each,
    ordered outward from Gamma (index 0 is the corner)."""

    grid: object
    phi: dict
    K: dict = None
    corner: dict = field(default_factory=dict)

    @classmethod
    def from_functions(cls, grid, phi1, phi2):
        """Sample callables of spacetime points (..., 4) -> (..., n) on S^1, S^2."""
        phi = {}
        for w, fn in ((1, phi1), (2, phi2)):
            X = grid.surface_spacetime_coords(w)
            v = np.asarray(fn(X), dtype=float)
            if v.ndim == X.ndim - 1:
                v = v[..., None]
            phi[w] = v
        return cls(grid, phi)

    @property
    def n(self):
        return self.phi[1].shape[-1]

    def corner_mismatch(self):
        return float(np.abs(self.phi[1][0] - self.phi[2][0]).max())

    def require_corner_compatible(self, tol=1e-12):
        mis = self.corner_mismatch()
        if mis > tol:
            raise DataError(f"corner incompatibility: phi^1 != phi^2 on Gamma (max mismatch {mis:.3e})")
        return mis
