"""Numerical check of the generalized Picone identity in one dimension.

For ``r = v/u`` and ``W = A (u v' - v u')`` one has
``u Lv - v Lu = -W'`` and ``W = A u^2 r'``, hence::

    int g(r) (u Lv - v Lu) = int u^2 g'(r) A r'^2 - [g(r) (u Rv - v Ru)]

where ``R = +-A d/dx + beta`` carries the outward normal, so the bracket is
``g(r) W`` at ``x_hi`` minus its value at ``x_lo``. Every quantity is evaluated
on the grid and the mismatch is reported.
"""

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .elliptic import EllipticProblem, assemble
from .errors import DomainError, ExpressionError
from .expr import Expression
from .grid import Field, integrate


@dataclass(frozen=True)
class PiconeReport:
    lhs: float
    volume_term: float
    boundary_term: float
    residual: float

    def to_dict(self):
        return asdict(self)


def _ratio_expression(g):
    if isinstance(g, Expression):
        return g
    try:
        return Expression(g, variable="t")
    except ExpressionError:
        return Expression(g, variable="x")


def _endpoint_slopes(u, h):
    """Second-order one-sided first derivatives at the two ends."""
    left = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    right = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return left, right


def apply_operator(p: EllipticProblem, u) -> np.ndarray:
    """``Lu`` at every node for a field that need not satisfy the boundary conditions.

    Interior rows come from the assembled matrix. At an endpoint the half-cell
    balance is used with the true boundary flux ``A u'`` (one-sided, second
    order) in place of the Robin data. For a Robin end this is the assembled
    row minus ``(2/h) R u``.
    """
    u = np.asarray(u, dtype=float)
    g = p.grid
    h, A, C = g.h, p.A.values, p.C.values
    Lu = assemble(p) @ u
    dl, dr = _endpoint_slopes(u, h)
    a_lo = 0.5 * (A[0] + A[1])
    a_hi = 0.5 * (A[-1] + A[-2])
    Lu[0] = (2 / h) * (-a_lo * (u[1] - u[0]) / h + A[0] * dl) + C[0] * u[0]
    Lu[-1] = (2 / h) * (a_hi * (u[-1] - u[-2]) / h - A[-1] * dr) + C[-1] * u[-1]
    return Lu


def boundary_values(p: EllipticProblem, u):
    """``R u`` at the left and right ends, ``R = +-A u' + beta u``."""
    u = np.asarray(u, dtype=float)
    dl, dr = _endpoint_slopes(u, p.grid.h)
    bl = 0.0 if p.bc_left.is_dirichlet else p.bc_left.beta
    br = 0.0 if p.bc_right.is_dirichlet else p.bc_right.beta
    A = p.A.values
    return -A[0] * dl + bl * u[0], A[-1] * dr + br * u[-1]


def _ratio(u, v, p: EllipticProblem):
    n = u.size
    interior = np.arange(1, n - 1)
    zero = interior[u[interior] == 0]
    if zero.size:
        i = int(zero[0])
        raise DomainError(f"u vanishes at interior node {i} (x={p.grid.x[i]:.6g}); v/u is undefined", node=i, x=float(p.grid.x[i]))
    r = np.empty(n)
    r[interior] = v[interior] / u[interior]
    # ends: divide if possible, otherwise take the one-sided limit
    if u[0] != 0:
        r[0] = v[0] / u[0]
    else:
        r[0] = 3 * r[1] - 3 * r[2] + r[3]
    if u[-1] != 0:
        r[-1] = v[-1] / u[-1]
    else:
        r[-1] = 3 * r[-2] - 3 * r[-3] + r[-4]
    return r


def _check_derivative(g, gp, r):
    lo, hi = float(r.min()), float(r.max())
    t = np.linspace(lo, hi, 7) if hi > lo else np.array([lo])
    d = 1e-5 * max(1.0, np.abs(t).max())
    try:
        fd = (g(t + d) - g(t - d)) / (2 * d)
        an = gp(t)
    except DomainError:
        return
    scale = max(1.0, float(np.abs(an).max()))
    if np.abs(fd - an).max() > 1e-4 * scale:
        warnings.warn("g_prime does not look like the derivative of g on the range of v/u", RuntimeWarning, stacklevel=3)


def picone_check(p: EllipticProblem, u, v, g, g_prime) -> PiconeReport:
    """Evaluate both sides of the Picone identity for grid functions ``u`` and ``v``.

    Parameters
    ----------
    p : EllipticProblem
        Supplies ``L`` and the Robin coefficients. ``A`` may change sign if the
        problem was built with ``allow_indefinite``.
    u, v : Field or array
        ``u`` must be nonzero at interior nodes. At an end where ``u = 0`` the
        ratio ``v/u`` is extended by extrapolation.
    g, g_prime : str or Expression
        ``g`` and its derivative, as expressions in ``t`` (or ``x``). They are
        not differentiated symbolically; a finite-difference consistency
        check only warns.

    Returns
    -------
    PiconeReport
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = _ratio_expression(g)
    gp = _ratio_expression(g_prime)
    grid = p.grid
    r = _ratio(u, v, p)
    _check_derivative(g, gp, r)

    gr = np.broadcast_to(g(r), r.shape)
    gpr = np.broadcast_to(gp(r), r.shape)
    Lu = apply_operator(p, u)
    Lv = apply_operator(p, v)
    lhs = integrate(Field(grid, gr * (u * Lv - v * Lu)))

    dr = np.gradient(r, grid.h, edge_order=2)
    volume = integrate(Field(grid, u**2 * gpr * p.A.values * dr**2))

    Ru_l, Ru_r = boundary_values(p, u)
    Rv_l, Rv_r = boundary_values(p, v)
    # the outward normal sits inside R, so the two ends add up to [g W] (right minus left)
    boundary = gr[-1] * (u[-1] * Rv_r - v[-1] * Ru_r) + gr[0] * (u[0] * Rv_l - v[0] * Ru_l)

    vals = (lhs, volume, boundary)
    if not all(np.isfinite(vals)):
        raise DomainError("Picone terms are not finite")
    return PiconeReport(float(lhs), float(volume), float(boundary), float(abs(lhs - (volume - boundary))))
