"""Mask-aware finite differences on structured lattices.

Centered second-order stencils in the interior, second-order one-sided
stencils next to masked or missing nodes, periodic wrap on request.
Higher derivatives are built by composing first derivatives, so discrete
identities between tensors computed from the same field compare like
with like.
"""
import numpy as np


def _shift(arr, k, axis, fill):
    """out[i] = arr[i + k] along axis, `fill` where i + k is out of range."""
    out = np.full_like(arr, fill)
    n = arr.shape[axis]
    if abs(k) >= n:
        return out
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if k > 0:
        src[axis] = slice(k, None)
        dst[axis] = slice(0, n - k)
    else:
        src[axis] = slice(0, n + k)
        dst[axis] = slice(-k, None)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def diff_axis(f, axis, h, valid=None, periodic=False):
    """First derivative of `f` along `axis` (spacing `h`).

    `valid` is a boolean array broadcastable to the leading dimensions of
    `f`; trailing component axes are carried along. Invalid nodes yield NaN.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    if periodic:
        if n < 3:
            return np.zeros_like(f)
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)

    if valid is None:
        valid = np.ones(f.shape[: axis + 1], dtype=bool)
    valid = np.asarray(valid, dtype=bool)
    extra = f.ndim - valid.ndim
    vm = valid.reshape(valid.shape + (1,) * extra)
    vm = np.broadcast_to(vm, f.shape)

    p1, p2 = _shift(vm, 1, axis, False), _shift(vm, 2, axis, False)
    m1, m2 = _shift(vm, -1, axis, False), _shift(vm, -2, axis, False)
    fp1, fp2 = _shift(f, 1, axis, np.nan), _shift(f, 2, axis, np.nan)
    fm1, fm2 = _shift(f, -1, axis, np.nan), _shift(f, -2, axis, np.nan)

    out = np.full_like(f, np.nan)
    central = vm & p1 & m1
    fwd = vm & ~central & p1 & p2
    bwd = vm & ~central & ~fwd & m1 & m2
    fwd1 = vm & ~(central | fwd | bwd) & p1
    bwd1 = vm & ~(central | fwd | bwd | fwd1) & m1
    alone = vm & ~(central | fwd | bwd | fwd1 | bwd1)

    with np.errstate(invalid="ignore"):
        out[central] = ((fp1 - fm1) / (2 * h))[central]
        out[fwd] = ((-3 * f + 4 * fp1 - fp2) / (2 * h))[fwd]
        out[bwd] = ((3 * f - 4 * fm1 + fm2) / (2 * h))[bwd]
        out[fwd1] = ((fp1 - f) / h)[fwd1]
        out[bwd1] = ((f - fm1) / h)[bwd1]
    out[alone] = 0.0
    return out


class BoxLattice:
    """Uniform Cartesian lattice in (x0, x1, x2, x3).

    Axes of length one are treated as symmetry directions (zero derivative).
    """

    def __init__(self, origin, spacing, shape, periodic=(False, False, False, False)):
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = np.asarray(spacing, dtype=float)
        self.shape = tuple(int(s) for s in shape)
        self.periodic = tuple(periodic)

    def coords(self):
        axes = [self.origin[k] + self.spacing[k] * np.arange(self.shape[k]) for k in range(4)]
        X = np.meshgrid(*axes, indexing="ij")
        return np.stack(X, axis=-1)

    def partial(self, f, mu):
        if self.shape[mu] == 1:
            return np.zeros_like(np.asarray(f, dtype=float))
        return diff_axis(f, mu, self.spacing[mu], periodic=self.periodic[mu])

    def grad(self, f):
        """Cartesian gradient; the derivative index is appended last."""
        return np.stack([self.partial(f, mu) for mu in range(4)], axis=-1)


def trapezoid_weights(n, h, periodic=False):
    if periodic:
        return np.full(n, h)
    if n == 1:
        return np.ones(1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def run_trapezoid_weights(valid, h):
    """Trapezoid weights along the last axis, restarting on every contiguous
    run of valid nodes (staircase-masked slices)."""
    valid = np.asarray(valid, dtype=bool)
    w = np.where(valid, h, 0.0)
    left = np.zeros_like(valid)
    left[..., 1:] = valid[..., :-1]
    right = np.zeros_like(valid)
    right[..., :-1] = valid[..., 1:]
    w = np.where(valid & ~left, w / 2, w)
    w = np.where(valid & ~right, w / 2, w)
    # an isolated node carries no length
    w = np.where(valid & ~left & ~right, 0.0, w)
    return w
