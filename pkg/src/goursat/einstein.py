"""Metric-level quantities for the vacuum equations in harmonic gauge.

Index conventions: a metric field g has shape (..., 4, 4); a first
derivative field dg has shape (..., 4, 4, 4) with dg[..., a, b, k] = d_k g_ab;
Christoffel symbols Gam[..., l, a, b] = Gamma^l_{ab}.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InversionError
from .system import ETA, QuasilinearSystem

PAIRS = [(a, b) for a in range(4) for b in range(a, 4)]


def sym_from_vec(u):
    u = np.asarray(u, dtype=float)
    g = np.empty(u.shape[:-1] + (4, 4))
    for k, (a, b) in enumerate(PAIRS):
        g[..., a, b] = u[..., k]
        g[..., b, a] = u[..., k]
    return g


def vec_from_sym(g):
    g = np.asarray(g, dtype=float)
    return np.stack([g[..., a, b] for a, b in PAIRS], axis=-1)


def dsym_from_dvec(du):
    """(..., 10, 4) -> (..., 4, 4, 4)."""
    du = np.asarray(du, dtype=float)
    out = np.empty(du.shape[:-2] + (4, 4, du.shape[-1]))
    for k, (a, b) in enumerate(PAIRS):
        out[..., a, b, :] = du[..., k, :]
        out[..., b, a, :] = du[..., k, :]
    return out


def inverse(g, tol=1e-12):
    g = np.asarray(g, dtype=float)
    det = np.linalg.det(g)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < tol):
        raise InversionError("metric is singular at some node")
    return np.linalg.inv(g)


# --- pointwise algebra -------------------------------------------------------

def christoffel_from(gi, dg):
    first = 0.5 * (np.einsum("...bta->...tab", dg) + np.einsum("...atb->...tab", dg)
                   - np.einsum("...abt->...tab", dg))
    return np.einsum("...lt,...tab->...lab", gi, first)


def contract_gauge(gi, Gam):
    return np.einsum("...ab,...lab->...l", gi, Gam)


def q_terms(gi, dg, Gv=None):
    """The six groups of the lower-order term Q_ab, in display order.

    The last group is read as (g_{mu b, eta} - g_{eta b, mu}); with that
    reading the sum reproduces Ricci minus its principal and gauge parts.
    """
    d = dg
    if Gv is None:
        Gv = contract_gauge(gi, christoffel_from(gi, dg))
    def e(spec, *ops):
        return np.einsum(spec, *ops, optimize=True)

    t1 = 0.5 * (e("...dab,...d->...ab", d, Gv) + e("...dba,...d->...ab", d, Gv))
    t2 = 0.5 * (e("...de,...lm,...ldb,...aem->...ab", gi, gi, d, d)
                + e("...de,...lm,...lda,...bem->...ab", gi, gi, d, d))
    t3 = -0.25 * e("...de,...lm,...dla,...meb->...ab", gi, gi, d, d)
    c4 = e("...de,...lm,...eld->...m", gi, gi, d)
    t4 = -0.5 * (e("...m,...mba->...ab", c4, d) + e("...m,...mab->...ab", c4, d)
                 - e("...m,...abm->...ab", c4, d))
    c5 = e("...de,...lm,...dem->...l", gi, gi, d)
    t5 = 0.25 * (e("...l,...alb->...ab", c5, d) + e("...l,...bla->...ab", c5, d)
                 - e("...l,...abl->...ab", c5, d))
    t6 = -0.5 * (e("...de,...lm,...dal,...mbe->...ab", gi, gi, d, d)
                 - e("...de,...lm,...dal,...ebm->...ab", gi, gi, d, d))
    return [t1, t2, t3, t4, t5, t6]


def q_lower_order_from(gi, dg):
    return sum(q_terms(gi, dg))


# --- grid fields -------------------------------------------------------------

@dataclass
class MetricField:
    """A sampled metric together with a lattice providing Cartesian `grad`."""

    g: np.ndarray
    lattice: object
    _gi: np.ndarray = field(default=None, repr=False)

    @property
    def inverse(self):
        if self._gi is None:
            self._gi = inverse(self.g)
        return self._gi

    def dg(self):
        return self.lattice.grad(self.g)


def christoffel(mf):
    return christoffel_from(mf.inverse, mf.dg())


def gauge_vector(mf):
    return contract_gauge(mf.inverse, christoffel(mf))


def gauge_vector_divergence_form(mf):
    """-(1/sqrt|g|) d_mu (sqrt|g| g^{l mu}), an independent route to Gamma^l."""
    sq = np.sqrt(np.abs(np.linalg.det(mf.g)))
    dens = sq[..., None, None] * mf.inverse
    ddens = mf.lattice.grad(dens)
    return -np.einsum("...lmm->...l", ddens) / sq[..., None]


def q_lower_order(mf):
    return q_lower_order_from(mf.inverse, mf.dg())


def full_ricci(mf):
    """R_ab = d_l Gam^l_ab - d_a d_b ln sqrt|g| + Gam^l_lt Gam^t_ab - Gam^l_bt Gam^t_al.

    The contracted term uses Gam^l_al = d_a ln sqrt|g| so that the discrete
    mixed partials commute and R stays symmetric to round-off.
    """
    Gam = christoffel(mf)
    dGam = mf.lattice.grad(Gam)
    lsq = 0.5 * np.log(np.abs(np.linalg.det(mf.g)))
    hess = mf.lattice.grad(mf.lattice.grad(lsq))
    e = np.einsum
    return (e("...labl->...ab", dGam) - hess
            + e("...llt,...tab->...ab", Gam, Gam) - e("...lbt,...tal->...ab", Gam, Gam))


def reduced_ricci(mf):
    dg = mf.dg()
    ddg = mf.lattice.grad(dg)
    gi = mf.inverse
    return -0.5 * np.einsum("...lg,...ablg->...ab", gi, ddg) + q_lower_order_from(gi, dg)


def ricci_identity_residual(mf):
    """R - R~ - 1/2 (g_la Gamma^l_,b + g_lb Gamma^l_,a), node-wise."""
    Gv = gauge_vector(mf)
    dGv = mf.lattice.grad(Gv)
    corr = 0.5 * (np.einsum("...la,...lb->...ab", mf.g, dGv) + np.einsum("...lb,...la->...ab", mf.g, dGv))
    return full_ricci(mf) - reduced_ricci(mf) - corr


# --- surface quantities ------------------------------------------------------

def symbol_eigenvalues(gi_surface, xi, w):
    """lambda_j = -1/2 sum_i (g^{0i} - (-1)^{w'+1} delta_{1j} g^{ij}) xi_i with
    w' = w - 1 the 0/1 surface label; j = 1, 2, 3. Real by construction."""
    gi = np.asarray(gi_surface, dtype=float)
    xi = np.asarray(xi, dtype=float)
    wp = w - 1
    lam = []
    for j in (1, 2, 3):
        coef = gi[..., 0, 1:].copy()
        if j == 1:
            coef = coef - (-1) ** (wp + 1) * gi[..., 1:, j]
        lam.append(-0.5 * np.einsum("...i,...i->...", coef, xi))
    return np.stack(lam, axis=-1)


def transverse_covector(w):
    """nu with [d_mu g]^w = K nu_mu + (tangential part)."""
    return np.array([1.0, (-1.0) ** w, 0.0, 0.0])


@dataclass
class QDecomposition:
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray
    T5: np.ndarray

    @property
    def partial_total(self):
        return self.T1 + self.T2 + self.T3 + self.T4

    @property
    def total(self):
        return self.partial_total + self.T5


def q_decomposition(K, gi_surface, w):
    """K-quadratic part of Q on S^w, split by term group.

    T1..T4 come from the paired, single, and two bracketed groups; T5 collects
    the gauge-vector group and the last group.
    """
    K = np.asarray(K, dtype=float)
    G = K[..., :, :, None] * transverse_covector(w)
    t = q_terms(np.asarray(gi_surface, dtype=float), G)
    return QDecomposition(t[1], t[2], t[3], t[4], t[0] + t[5])


def dissipativity_probe(samples=200, eps=0.05, seed=0, w=1):
    """Sign statistics of the K-quadratic form near the flat metric.

    Returns the fraction of (metric, K) samples whose trace of the
    quadratic part is <= 0, plus extreme values. Findings are recorded,
    not asserted.
    """
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(samples):
        P = rng.normal(size=(4, 4))
        g = ETA + eps * 0.5 * (P + P.T)
        K = rng.normal(size=(4, 4))
        K = 0.5 * (K + K.T)
        q = q_decomposition(K, np.linalg.inv(g), w).total
        vals.append(np.trace(q))
    vals = np.array(vals)
    return {"fraction_nonpositive": float(np.mean(vals <= 0)), "min": float(vals.min()), "max": float(vals.max())}


# --- energy ------------------------------------------------------------------

@dataclass
class EnergyTrace:
    times: np.ndarray
    E: np.ndarray
    c_measured: float = None
    bound_ok: bool = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.E = np.asarray(self.E, dtype=float)
        if np.any(self.E < 0):
            raise ValueError("energies must be nonnegative")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def energy(K, weights):
    """1/2 sum over nodes of weight * sum_{ab} K_ab^2 (all 16 slots)."""
    K = np.asarray(K, dtype=float)
    return 0.5 * float(np.sum(np.asarray(weights) * np.sum(K**2, axis=(-2, -1))))


@dataclass
class GronwallVerdict:
    passed: bool
    c_measured: float
    c_used: float
    worst_ratio: float
    message: str = ""


def gronwall_check(trace, c=None):
    """E(t) <= E(t0) exp(c (t - t0)) (1 + 1e-6) over the recorded times."""
    t, E = trace.times, trace.E
    E0 = E[0]
    if E0 == 0.0:
        if np.any(E > 0):
            return GronwallVerdict(False, np.inf, c if c is not None else np.inf, np.inf,
                                   "E(t0) = 0 but energy appears later")
        trace.c_measured, trace.bound_ok = 0.0, True
        return GronwallVerdict(True, 0.0, 0.0 if c is None else c, 0.0, "identically zero energy")
    with np.errstate(divide="ignore"):
        logE = np.log(E)
    rates = np.diff(logE) / np.diff(t) if len(t) > 1 else np.array([0.0])
    c_hat = float(np.max(rates)) if np.all(np.isfinite(rates)) else np.inf
    c_used = c_hat if c is None else c
    bound = E0 * np.exp(c_used * (t - t[0])) * (1 + 1e-6)
    ratio = float(np.max(E / bound))
    ok = bool(np.isfinite(c_hat) and ratio <= 1.0)
    trace.c_measured, trace.bound_ok = c_hat, ok
    return GronwallVerdict(ok, c_hat, c_used, ratio)


# --- analytic metrics --------------------------------------------------------

@dataclass
class AnalyticMetric:
    """A metric with exact first derivatives, for sampling data and oracles."""

    name: str
    g: object
    dg: object

    def ddg(self, X, step=1e-5):
        """Second derivatives by central differences of the exact gradient."""
        X = np.asarray(X, dtype=float)
        cols = []
        for k in range(4):
            e = np.zeros(4)
            e[k] = step
            cols.append((self.dg(X + e) - self.dg(X - e)) / (2 * step))
        return np.stack(cols, axis=-1)

    def sample(self, X):
        return self.g(np.asarray(X, dtype=float))

    def sample_vec(self, X):
        return vec_from_sym(self.sample(X))


def minkowski():
    def g(X):
        return np.broadcast_to(ETA, X.shape[:-1] + (4, 4)).copy()

    def dg(X):
        return np.zeros(X.shape[:-1] + (4, 4, 4))

    return AnalyticMetric("minkowski", g, dg)


def flrw_flat(alpha=0.2, beta=0.1):
    """diag(1, -s^2, -s^2, -s^2) with scale factor s(t) = 1 + alpha t + beta t^2."""

    def s(t):
        return 1 + alpha * t + beta * t * t

    def sd(t):
        return alpha + 2 * beta * t

    def g(X):
        out = np.zeros(X.shape[:-1] + (4, 4))
        out[..., 0, 0] = 1.0
        for i in (1, 2, 3):
            out[..., i, i] = -s(X[..., 0]) ** 2
        return out

    def dg(X):
        out = np.zeros(X.shape[:-1] + (4, 4, 4))
        for i in (1, 2, 3):
            out[..., i, i, 0] = -2 * s(X[..., 0]) * sd(X[..., 0])
        return out

    m = AnalyticMetric("flrw_flat", g, dg)
    m.scale, m.scale_dot, m.scale_ddot = s, sd, (lambda t: 2 * beta + 0 * t)
    return m


def linearized_tt_wave(eps=1e-3, k=2 * np.pi, polarization="plus"):
    """eta + eps e(pol) cos(k (x0 - x1)) on the transverse block."""
    if polarization == "plus":
        pol = np.array([[-1.0, 0.0], [0.0, 1.0]])
    elif polarization == "cross":
        pol = np.array([[0.0, -1.0], [-1.0, 0.0]])
    else:
        raise ValueError(f"unknown polarization {polarization!r}")

    def g(X):
        out = np.broadcast_to(ETA, X.shape[:-1] + (4, 4)).copy()
        c = np.cos(k * (X[..., 0] - X[..., 1]))
        out[..., 2:, 2:] += eps * c[..., None, None] * pol
        return out

    def dg(X):
        out = np.zeros(X.shape[:-1] + (4, 4, 4))
        s = -k * np.sin(k * (X[..., 0] - X[..., 1]))
        out[..., 2:, 2:, 0] = eps * s[..., None, None] * pol
        out[..., 2:, 2:, 1] = -eps * s[..., None, None] * pol
        return out

    return AnalyticMetric(f"linearized_tt_wave({polarization})", g, dg)


def harmonic_gauge_wave(eps=1e-3, k=2 * np.pi, amp_a=(1.0, 0.5), amp_b=(0.7, -0.4), phase=0.3):
    """Flat spacetime in harmonic, plane-symmetric coordinates.

    Minkowski coordinates are X^k = x^k - eps (q_k(a) + r_k(b)) for k = 2, 3
    (X^0 = x^0, X^1 = x^1), with q_k = A_k sin(k a)/k, r_k = B_k sin(k b + phase)/k.
    Every such transformation is harmonic, so the metric is an exact vacuum
    solution with Gamma^l = 0, and both null surfaces stay characteristic.
    """
    A = np.asarray(amp_a, dtype=float)
    B = np.asarray(amp_b, dtype=float)
    da = np.array([1.0, -1.0, 0.0, 0.0])
    db = np.array([1.0, 1.0, 0.0, 0.0])

    def parts(X):
        a = X[..., 0] - X[..., 1]
        b = X[..., 0] + X[..., 1]
        qp = eps * A * np.cos(k * a)[..., None]
        rp = eps * B * np.cos(k * b + phase)[..., None]
        qpp = -eps * k * A * np.sin(k * a)[..., None]
        rpp = -eps * k * B * np.sin(k * b + phase)[..., None]
        return qp, rp, qpp, rpp

    def covectors(qp, rp):
        # v_k = q_k' da + r_k' db, shape (..., 2, 4)
        return qp[..., None] * da + rp[..., None] * db

    def g(X):
        qp, rp, _, _ = parts(X)
        v = covectors(qp, rp)
        out = np.broadcast_to(ETA, X.shape[:-1] + (4, 4)).copy()
        for j, kk in enumerate((2, 3)):
            e = np.zeros(4)
            e[kk] = 1.0
            vj = v[..., j, :]
            out += e[:, None] * vj[..., None, :] + vj[..., :, None] * e[None, :]
            out -= vj[..., :, None] * vj[..., None, :]
        return out

    def dg(X):
        qp, rp, qpp, rpp = parts(X)
        v = covectors(qp, rp)
        out = np.zeros(X.shape[:-1] + (4, 4, 4))
        for j, kk in enumerate((2, 3)):
            e = np.zeros(4)
            e[kk] = 1.0
            vj = v[..., j, :]
            # d_mu v_j = q'' da_mu da + r'' db_mu db
            dv = (qpp[..., j, None, None] * da[:, None] * da[None, :]
                  + rpp[..., j, None, None] * db[:, None] * db[None, :])  # [..., comp, mu]
            out += np.einsum("a,...bm->...abm", e, dv) + np.einsum("...am,b->...abm", dv, e)
            out -= np.einsum("...am,...b->...abm", dv, vj) + np.einsum("...a,...bm->...abm", vj, dv)
        return out

    return AnalyticMetric("harmonic_gauge_wave", g, dg)


def random_smooth_metric(seed, eps=0.05, modes=3, kmax=2.0, characteristic=False):
    """eta + eps sum_j S_j sin(k_j . x + phase_j). With `characteristic` only
    the transverse block is perturbed, so g^00 = 1, g^01 = 0, g^11 = -1 and
    every surface x0 = +-x1 is null."""
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(modes, 4, 4))
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    if characteristic:
        S[:, :2, :] = 0.0
        S[:, :, :2] = 0.0
    kv = rng.uniform(-kmax, kmax, size=(modes, 4))
    ph = rng.uniform(0, 2 * np.pi, size=modes)

    def g(X):
        arg = X @ kv.T + ph
        return ETA + eps * np.einsum("...j,jab->...ab", np.sin(arg), S)

    def dg(X):
        arg = X @ kv.T + ph
        return eps * np.einsum("...j,jab,jk->...abk", np.cos(arg), S, kv)

    return AnalyticMetric(f"random_smooth({seed})", g, dg)


METRICS = {
    "minkowski": minkowski,
    "flrw_flat": flrw_flat,
    "linearized_tt_wave": linearized_tt_wave,
    "harmonic_gauge_wave": harmonic_gauge_wave,
}


# --- the reduced system as a quasilinear system -----------------------------

def einstein_reduced_system():
    """g^{lm} d2_{lm} g_ab - 2 Q_ab = 0 in the 10 unknowns g_ab (a <= b).

    The principal coefficient is the exact inverse metric, so it is not
    affine in the unknowns.
    """

    def A_raw(x, u):
        return inverse(sym_from_vec(u))

    def f(x, u, du):
        g = sym_from_vec(u)
        dg = dsym_from_dvec(du)
        return -2.0 * vec_from_sym(q_lower_order_from(inverse(g), dg))

    return QuasilinearSystem(n=10, A_raw=A_raw, f=f, ref_u=vec_from_sym(ETA), name="einstein_reduced_plane")
