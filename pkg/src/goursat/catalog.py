"""Built-in systems and manufactured solutions."""
import numpy as np

from .einstein import einstein_reduced_system
from .system import ETA, QuasilinearSystem


def _source_term(source):
    if source is None:
        return lambda x, u, du: np.zeros(np.shape(u))
    return lambda x, u, du: np.broadcast_to(np.asarray(source(x), dtype=float)[..., None], np.shape(u))


def linear_wave(source=None, n=1):
    """eta^{lm} d2_{lm} u + s(x) = 0, componentwise."""
    src = _source_term(source)
    return QuasilinearSystem(n=n, f=src, name="linear_wave")


def semilinear_cubic(source=None, coupling=1.0):
    """box u + c u^3 + s(x) = 0."""
    src = _source_term(source)

    def f(x, u, du):
        return coupling * u**3 + src(x, u, du)

    return QuasilinearSystem(n=1, f=f, name="semilinear_cubic")


def quasilinear_demo(eps=0.1, source=None):
    """A^00 = 1 + eps u, other coefficients flat; f = s(x).

    The surfaces stay characteristic only where u = 0, so Goursat data for
    this system must vanish on S^1 and S^2.
    """
    A1 = np.zeros((1, 4, 4))
    A1[0, 0, 0] = eps
    return QuasilinearSystem(n=1, A1=A1, A2=ETA, f=_source_term(source), name="quasilinear_demo")


def null_form_system(c_null=1.0, c_bad=0.0):
    """box u + c_null (du_0^2 - |grad u|^2) + c_bad (d0 u)^2 = 0.

    The first quadratic term is a null form; the second is not.
    """

    def f(x, u, du):
        d = du[..., 0, :]
        q0 = d[..., 0] ** 2 - np.sum(d[..., 1:] ** 2, axis=-1)
        return (c_null * q0 + c_bad * d[..., 0] ** 2)[..., None]

    return QuasilinearSystem(n=1, f=f, name="null_form")


class Manufactured:
    """u = amp sin(k_a a + p_a) sin(k_b b + p_b) with exact derivatives.

    With zero phases and k L = pi the field vanishes on both null surfaces.
    """

    def __init__(self, amp=0.1, ka=np.pi, kb=np.pi, pa=0.0, pb=0.0):
        self.amp, self.ka, self.kb, self.pa, self.pb = amp, ka, kb, pa, pb

    def _ab(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] - x[..., 1], x[..., 0] + x[..., 1]

    def u(self, x):
        a, b = self._ab(x)
        return self.amp * np.sin(self.ka * a + self.pa) * np.sin(self.kb * b + self.pb)

    def box(self, x):
        """eta^{lm} d2_{lm} u = 4 u_ab."""
        a, b = self._ab(x)
        return 4 * self.amp * self.ka * self.kb * np.cos(self.ka * a + self.pa) * np.cos(self.kb * b + self.pb)

    def d0sq(self, x):
        """d_0^2 u = u_aa + 2 u_ab + u_bb."""
        a, b = self._ab(x)
        sa, ca = np.sin(self.ka * a + self.pa), np.cos(self.ka * a + self.pa)
        sb, cb = np.sin(self.kb * b + self.pb), np.cos(self.kb * b + self.pb)
        return self.amp * (-(self.ka**2) * sa * sb + 2 * self.ka * self.kb * ca * cb - self.kb**2 * sa * sb)

    def restricted(self, w):
        return lambda X: self.u(X)[..., None]


def manufactured_semilinear(m, coupling=1.0):
    """Cubic system whose exact solution is the manufactured field m."""
    return semilinear_cubic(source=lambda x: -m.box(x) - coupling * m.u(x) ** 3, coupling=coupling)


def manufactured_quasilinear(m, eps):
    return quasilinear_demo(eps, source=lambda x: -m.box(x) - eps * m.u(x) * m.d0sq(x))


SYSTEMS = {
    "linear_wave": linear_wave,
    "semilinear_cubic": semilinear_cubic,
    "quasilinear_demo": quasilinear_demo,
    "einstein_reduced_plane": einstein_reduced_system,
}
