"""Diffusive Lotka-Volterra systems with spatially varying coefficients.

Symbiotic kind::

    d1 L1 u = lambda u - a u^2 + b u v
    d2 L2 v = mu v     - d v^2 + c u v

Competitive kind: the same with ``- b u v`` and ``- c u v``.

All eigenvalues below are principal eigenvalues of Z-matrices, computed with
the inverse-iteration engine of :mod:`picone_lab.elliptic`. For
``d L + V`` the weights ``w / d`` make the discrete operator self-adjoint.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .elliptic import EllipticProblem, active_operator, principal_eigen
from .errors import (
    BoundViolationError,
    ConfigurationError,
    ContinuationError,
    CooperativeStructureError,
    DomainError,
    IterationError,
    NoConvergenceError,
    PreconditionError,
)
from .grid import Field, fmt

SYMBIOTIC = "Symbiotic"
COMPETITIVE = "Competitive"
BOUNDARY_TOL = 1e-6
BLOWUP = 1e6
SEED = 0xC0FFEE


# ---------------------------------------------------------------------------
# the F+- functions


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or np.any(k > 1) or not np.all(np.isfinite(k)):
        raise DomainError("k must lie in [0, 1]")
    return k


def F_pm(k):
    """``F-(k), F+(k) = (27 - 18k - k^2 -+ (9-k)^(3/2) (1-k)^(1/2)) / 8``."""
    k = _check_k(k)
    base = 27.0 - 18.0 * k - k * k
    rad = (9.0 - k) ** 1.5 * np.sqrt(1.0 - k)
    lo, hi = (base - rad) / 8.0, (base + rad) / 8.0
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def z_pm(k):
    """Critical points ``z-(k) <= 1 <= z+(k)`` of ``z^2 (z - k) / (z - 1)``."""
    k = _check_k(k)
    root = np.sqrt((9.0 - k) * (1.0 - k))
    lo, hi = (3.0 + k - root) / 4.0, (3.0 + k + root) / 4.0
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def F_of_z(z, k):
    """``F(z; k) = z^2 (z - k) / (z - 1)``."""
    z = np.asarray(z, dtype=float)
    return z * z * (z - k) / (z - 1.0)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class LVSystem:
    kind: str
    d1: Field
    d2: Field
    lam: Field
    mu: Field
    a: Field
    b: Field
    c: Field
    d: Field
    op1: EllipticProblem
    op2: EllipticProblem

    def __post_init__(self):
        if self.kind not in (SYMBIOTIC, COMPETITIVE):
            raise ConfigurationError(f"system kind must be 'Symbiotic' or 'Competitive', got {self.kind!r}")
        if self.op1.grid != self.op2.grid:
            raise ConfigurationError("both operators must live on the same grid")
        for name in ("d1", "d2", "a", "b", "c", "d"):
            vals = getattr(self, name).values
            if not vals.min() > 0:
                raise ConfigurationError(f"coefficient {name} must be positive everywhere (min {vals.min():.6g})")

    @property
    def grid(self):
        return self.op1.grid

    @property
    def sign(self):
        """+1 for symbiosis, -1 for competition (sign of the interaction terms)."""
        return 1.0 if self.kind == SYMBIOTIC else -1.0

    @property
    def kappa(self) -> np.ndarray:
        return self.b.values * self.c.values / (self.a.values * self.d.values)

    @property
    def low_interaction(self) -> bool:
        k = self.kappa
        return bool(np.all(k <= 1.0) and np.any(k < 1.0))

    def with_rates(self, lam_val=None, mu_val=None) -> "LVSystem":
        """Copy with constant growth rates, where given."""
        g = self.grid
        lam = self.lam if lam_val is None else Field(g, float(lam_val))
        mu = self.mu if mu_val is None else Field(g, float(mu_val))
        return LVSystem(self.kind, self.d1, self.d2, lam, mu, self.a, self.b, self.c, self.d, self.op1, self.op2)


@dataclass(frozen=True)
class StabilityWindow:
    lower: float
    upper: float
    feasible: bool
    xi: float | None

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "feasible": self.feasible}


@dataclass(frozen=True)
class CoexistenceState:
    u: Field
    v: Field
    residual: float
    linearization_sigma: float


@dataclass(frozen=True)
class RegionLabel:
    label: str
    sig1: float
    sig2: float
    sig1_cross: float
    sig2_cross: float
    lam: float = float("nan")
    mu: float = float("nan")


def stability_window(sys: LVSystem) -> StabilityWindow:
    """Nodewise bounds ``(a d^2 / c^3)(d2/d1) F-+(kappa)``.

    ``lower`` is the maximum of the ``F-`` bound, ``upper`` the minimum of the
    ``F+`` bound. The window is feasible when ``lower <= upper``; ``xi`` is then
    the midpoint.

    Raises
    ------
    PreconditionError
        If ``kappa > 1`` somewhere.
    """
    k = sys.kappa
    if np.any(k > 1.0 + 1e-14):
        i = int(np.argmax(k))
        raise PreconditionError(f"low-interaction condition fails: kappa = {k[i]:.6g} > 1 at x = {sys.grid.x[i]:.6g}")
    k = np.minimum(k, 1.0)
    weight = sys.a.values * sys.d.values**2 / sys.c.values**3 * (sys.d2.values / sys.d1.values)
    fm, fp = F_pm(k)
    lower = float(np.max(weight * fm))
    upper = float(np.min(weight * fp))
    feasible = lower <= upper
    return StabilityWindow(lower, upper, feasible, 0.5 * (lower + upper) if feasible else None)


def uniqueness_condition(sys: LVSystem) -> bool:
    """``max(c/d) < min(a/b)``, needed for the symbiotic uniqueness claims."""
    return bool(np.max(sys.c.values / sys.d.values) < np.min(sys.a.values / sys.b.values))


# ---------------------------------------------------------------------------
# scaled operators


def _scaled(dfield: Field, op: EllipticProblem) -> sp.csr_matrix:
    """``diag(d) L`` on the active nodes of ``op``."""
    idx = op.active
    return (sp.diags(dfield.values[idx]) @ active_operator(op)).tocsr()


def _sigma(dfield: Field, op: EllipticProblem, V, want_vector=False):
    """Principal eigenvalue of ``d L + V``."""
    idx = op.active
    V = np.broadcast_to(np.asarray(V, dtype=float), (op.grid.n,))
    M = _scaled(dfield, op) + sp.diags(V[idx])
    weights = op.grid.weights[idx] / dfield.values[idx]
    sigma, vec, _, _ = principal_eigen(M, weights)
    if want_vector:
        full = np.zeros(op.grid.n)
        full[idx] = vec
        return sigma, full
    return sigma


def _logistic_residual(Dl, growth, weight, th):
    return Dl @ th - growth * th + weight * th * th


def _logistic_newton(Dl, growth, weight, th, tol=1e-11, max_iter=100):
    F = _logistic_residual(Dl, growth, weight, th)
    nrm = np.abs(F).max()
    for _ in range(max_iter):
        if nrm <= tol * max(1.0, np.abs(th).max()):
            return th
        J = (Dl + sp.diags(2 * weight * th - growth)).tocsc()
        step = spsolve(J, -F)
        t = 1.0
        while True:
            trial = th + t * step
            Ft = _logistic_residual(Dl, growth, weight, trial)
            if np.abs(Ft).max() < nrm or t < 1e-4:
                break
            t *= 0.5
        th, F, nrm = trial, Ft, np.abs(Ft).max()
    raise NoConvergenceError(f"logistic Newton did not converge (residual {nrm:.3e})", residual=float(nrm))


def logistic_state(d: Field, growth: Field, weight: Field, op: EllipticProblem) -> Field:
    """Nonnegative solution of ``d L theta = growth theta - weight theta^2``.

    Zero when ``sigma[dL - growth] >= 0``. Otherwise Newton is run from two
    seeds: the eigenfunction scaled to the linear-theory amplitude, and a
    large multiple of it from above. Both must reach the same positive state.

    Raises
    ------
    IterationError
        If the two runs disagree or leave the positive cone.
    """
    g = op.grid
    idx = op.active
    growth_v = np.broadcast_to(np.asarray(growth, dtype=float), (g.n,))
    weight_v = np.broadcast_to(np.asarray(weight, dtype=float), (g.n,))
    sigma, phi = _sigma(d, op, -growth_v, want_vector=True)
    if sigma >= 0:
        return Field(g, np.zeros(g.n))
    Dl = _scaled(d, op)
    gr, wt = growth_v[idx], weight_v[idx]
    ph = phi[idx]
    w = g.weights[idx] / d.values[idx]
    amp = -sigma * np.dot(w, ph * ph) / np.dot(w, wt * ph**3)
    low = _logistic_newton(Dl, gr, wt, amp * ph)
    top = max(float(np.max(gr / wt)), 1.0) * 2.0
    high = _logistic_newton(Dl, gr, wt, top * ph / ph.max() + low)
    if not np.all(low > 0) or np.abs(low - high).max() > 1e-8 * max(1.0, np.abs(low).max()):
        raise IterationError("logistic solutions from different seeds disagree")
    full = np.zeros(g.n)
    full[idx] = 0.5 * (low + high)
    return Field(g, full)


def semitrivial_states(sys: LVSystem):
    th1 = logistic_state(sys.d1, sys.lam, sys.a, sys.op1)
    th2 = logistic_state(sys.d2, sys.mu, sys.d, sys.op2)
    return th1, th2


# ---------------------------------------------------------------------------
# coupled residual and Jacobian


class _Coupled:
    """Active-node bookkeeping for the two-component system."""

    def __init__(self, sys: LVSystem):
        self.sys = sys
        self.i1 = sys.op1.active
        self.i2 = sys.op2.active
        self.n1 = self.i1.size
        self.D1 = _scaled(sys.d1, sys.op1)
        self.D2 = _scaled(sys.d2, sys.op2)
        n = sys.grid.n
        # interleave by node so that the block matrix stays banded
        keys = np.concatenate([2 * self.i1, 2 * self.i2 + 1])
        self.perm = np.argsort(keys, kind="stable")

    def split(self, z):
        return z[: self.n1], z[self.n1 :]

    def full(self, z):
        n = self.sys.grid.n
        u, v = np.zeros(n), np.zeros(n)
        u[self.i1], v[self.i2] = self.split(z)
        return u, v

    def pack(self, u, v):
        return np.concatenate([np.asarray(u)[self.i1], np.asarray(v)[self.i2]])

    def residual(self, z, s=1.0):
        sysm = self.sys
        u, v = self.full(z)
        k = sysm.sign * s
        F1 = self.D1 @ u[self.i1] - (sysm.lam.values * u - sysm.a.values * u * u + k * sysm.b.values * u * v)[self.i1]
        F2 = self.D2 @ v[self.i2] - (sysm.mu.values * v - sysm.d.values * v * v + k * sysm.c.values * u * v)[self.i2]
        return np.concatenate([F1, F2])

    def jacobian(self, z, s=1.0):
        sysm = self.sys
        u, v = self.full(z)
        k = sysm.sign * s
        i1, i2 = self.i1, self.i2
        a, b, c, d = sysm.a.values, sysm.b.values, sysm.c.values, sysm.d.values
        J11 = self.D1 + sp.diags((-sysm.lam.values + 2 * a * u - k * b * v)[i1])
        J22 = self.D2 + sp.diags((-sysm.mu.values + 2 * d * v - k * c * u)[i2])
        J12 = _couple(i1, i2, -k * b * u, sysm.grid.n)
        J21 = _couple(i2, i1, -k * c * v, sysm.grid.n)
        return sp.bmat([[J11, J12], [J21, J22]], format="csr")

    def newton(self, z, s=1.0, tol=1e-10, max_iter=60):
        F = self.residual(z, s)
        nrm = np.abs(F).max()
        for _ in range(max_iter):
            if nrm <= tol * max(1.0, np.abs(z).max()):
                return z, nrm
            step = spsolve(self.jacobian(z, s).tocsc(), -F)
            if not np.all(np.isfinite(step)):
                break
            t = 1.0
            while True:
                trial = z + t * step
                Ft = self.residual(trial, s)
                if np.abs(Ft).max() < nrm or t < 1e-4:
                    break
                t *= 0.5
            z, F, nrm = trial, Ft, np.abs(Ft).max()
        raise NoConvergenceError(f"coupled Newton did not converge (residual {nrm:.3e})", residual=float(nrm))


def _couple(rows, cols, vals, n):
    """Diagonal coupling between two active index sets of one grid."""
    pos = {int(j): k for k, j in enumerate(cols)}
    r, cc, data = [], [], []
    for k, i in enumerate(rows):
        j = pos.get(int(i))
        if j is not None:
            r.append(k)
            cc.append(j)
            data.append(vals[i])
    return sp.csr_matrix((data, (r, cc)), shape=(rows.size, cols.size))


def _cooperative_matrix(cp: _Coupled, z):
    """Jacobian with the competitive sign flip applied."""
    J = cp.jacobian(z)
    if cp.sys.kind == COMPETITIVE:
        flip = np.concatenate([np.ones(cp.n1), -np.ones(J.shape[0] - cp.n1)])
        J = (sp.diags(flip) @ J @ sp.diags(flip)).tocsr()
    return J


def linearization_matrix(sys: LVSystem, u, v) -> sp.csr_matrix:
    """The cooperative ``2n x 2n`` linearization in block order ``(u, v)``."""
    cp = _Coupled(sys)
    return _cooperative_matrix(cp, cp.pack(u, v))


def linearization_sigma(sys: LVSystem, state, tol: float = 1e-6) -> float:
    """Principal eigenvalue of the linearization at a coexistence state.

    Raises
    ------
    PreconditionError
        If ``state`` does not solve the system within ``tol`` (scaled).
    CooperativeStructureError
        If the eigenvector is not positive in both components.
    """
    cp = _Coupled(sys)
    z = cp.pack(state.u.values if isinstance(state.u, Field) else state.u, state.v.values if isinstance(state.v, Field) else state.v)
    res = np.abs(cp.residual(z)).max()
    if res > tol * max(1.0, np.abs(z).max()):
        raise PreconditionError(f"state does not solve the system (residual {res:.3e})")
    return _block_sigma(cp, z)


def _block_sigma(cp, z):
    J = _cooperative_matrix(cp, z)
    P = cp.perm
    Jp = J[P][:, P]
    try:
        sigma, vec, _, _ = principal_eigen(Jp)
    except Exception as exc:
        raise CooperativeStructureError(f"block eigenproblem failed: {exc}") from exc
    if not np.all(vec > 0):
        raise CooperativeStructureError("principal eigenvector of the linearization is not positive")
    return float(sigma)


# ---------------------------------------------------------------------------
# classification


def _cross_terms(sys, th1, th2, s1, s2):
    k = -sys.sign  # cross potential: -c theta1 (symbiotic), +c theta1 (competitive)
    s2c = _sigma(sys.d2, sys.op2, -sys.mu.values + k * sys.c.values * th1.values) if s1 < 0 else s2
    s1c = _sigma(sys.d1, sys.op1, -sys.lam.values + k * sys.b.values * th2.values) if s2 < 0 else s1
    return s1c, s2c


def _label(kind, s1, s2, s1c, s2c, tol):
    z1, z2 = abs(s1) < tol, abs(s2) < tol
    z1c, z2c = abs(s1c) < tol, abs(s2c) < tol
    neg = lambda x: x < 0 and abs(x) >= tol  # noqa: E731
    pos = lambda x: x > 0 and abs(x) >= tol  # noqa: E731
    if kind == SYMBIOTIC:
        if (z1 and s2 >= -tol) or (z2 and s1 >= -tol):
            return "boundary_I"
        if (z1 and neg(s2)) or (z2 and neg(s1)):
            return "boundary_III"
        if (neg(s1) and z2c) or (neg(s2) and z1c):
            return "boundary_II"
        if neg(s1) and neg(s2):
            return "B"
        if neg(s1):
            return "A" if neg(s2c) else "F"
        if neg(s2):
            return "C" if neg(s1c) else "D"
        return "E"
    if (neg(s1) and z2) or (z1 and neg(s2)):
        return "boundary_I"
    if (s1 >= -tol and z2) or (z1 and s2 >= -tol):
        return "boundary_II"
    if (neg(s1) and z2c) or (neg(s2) and z1c):
        return "boundary_III"
    if pos(s1):
        return "C" if neg(s2) else "D"
    if neg(s2):
        if neg(s1c) and neg(s2c):
            return "A"
        if neg(s2c):
            return "B"
        if neg(s1c):
            return "F"
        return "unclassified"
    return "E"


def classify_region(sys: LVSystem, lam_val: float, mu_val: float, tol: float = BOUNDARY_TOL) -> RegionLabel:
    """Region of the ``(lambda, mu)`` plane for constant growth rates.

    Computes ``sigma[d1 L1 - lambda]``, ``sigma[d2 L2 - mu]`` and the two
    cross eigenvalues at the semitrivial states, then maps signs to labels
    A-F. Eigenvalues within ``tol`` of zero give the boundary labels.
    """
    s = sys.with_rates(lam_val, mu_val)
    s1 = _sigma(s.d1, s.op1, -s.lam.values)
    s2 = _sigma(s.d2, s.op2, -s.mu.values)
    th1 = logistic_state(s.d1, s.lam, s.a, s.op1) if s1 < 0 else Field(s.grid, 0.0)
    th2 = logistic_state(s.d2, s.mu, s.d, s.op2) if s2 < 0 else Field(s.grid, 0.0)
    s1c, s2c = _cross_terms(s, th1, th2, s1, s2)
    return RegionLabel(_label(s.kind, s1, s2, s1c, s2c, tol), s1, s2, s1c, s2c, float(lam_val), float(mu_val))


def _axis(rng, steps):
    lo, hi = float(rng[0]), float(rng[1])
    return np.array([lo]) if steps == 1 else np.linspace(lo, hi, steps)


def region_scan(sys: LVSystem, lam_range, mu_range, steps: int, tol: float = BOUNDARY_TOL) -> list:
    """``classify_region`` on a uniform ``steps x steps`` grid, lambda-major."""
    if int(steps) < 1:
        raise ConfigurationError("scan needs at least one step per axis")
    out = []
    for lam in _axis(lam_range, int(steps)):
        for mu in _axis(mu_range, int(steps)):
            out.append(classify_region(sys, lam, mu, tol))
    return out


def region_csv(labels) -> str:
    lines = ["lambda,mu,label,sig1,sig2,sig1_cross,sig2_cross"]
    for r in labels:
        lines.append(",".join([fmt(r.lam), fmt(r.mu), r.label, fmt(r.sig1), fmt(r.sig2), fmt(r.sig1_cross), fmt(r.sig2_cross)]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# coexistence


def bound_box(sys: LVSystem):
    """Constant supersolution ``(U, V)`` for the symbiotic system, or ``None``.

    Solves ``min(a) U - max(b) V = max(lambda - d1 C1)^+ + 1`` and
    ``-max(c) U + min(d) V = max(mu - d2 C2)^+ + 1``. A positive solution exists
    exactly when ``min(a) min(d) > max(b) max(c)``.
    """
    amin, dmin = sys.a.values.min(), sys.d.values.min()
    bmax, cmax = sys.b.values.max(), sys.c.values.max()
    r1 = max(0.0, float(np.max(sys.lam.values - sys.d1.values * sys.op1.C.values))) + 1.0
    r2 = max(0.0, float(np.max(sys.mu.values - sys.d2.values * sys.op2.C.values))) + 1.0
    det = amin * dmin - bmax * cmax
    if not det > 0:
        return None
    U = (dmin * r1 + bmax * r2) / det
    V = (cmax * r1 + amin * r2) / det
    return float(U), float(V)


def _positive_subsolution(dfield, op, V, weight):
    """``eps psi`` with ``psi`` the principal eigenfunction of ``dL + V``, if ``sigma < 0``."""
    sigma, psi = _sigma(dfield, op, V, want_vector=True)
    if not sigma < 0:
        return None
    eps = 0.5 * (-sigma) / (float(np.max(weight)) * float(psi.max()))
    return eps * psi


def _symbiotic(sys: LVSystem, tol, max_iter=200000):
    g = sys.grid
    cp = _Coupled(sys)
    th1, th2 = semitrivial_states(sys)
    u, v = th1.values.copy(), th2.values.copy()
    a, b, c, d = sys.a.values, sys.b.values, sys.c.values, sys.d.values
    # a strictly positive start below the minimal coexistence state
    if not np.any(u > 0):
        w = _positive_subsolution(sys.d1, sys.op1, -sys.lam.values - b * v, a)
        if w is None:
            raise ContinuationError("no positive subsolution for u; no coexistence state is expected")
        u = w
    if not np.any(v > 0):
        w = _positive_subsolution(sys.d2, sys.op2, -sys.mu.values - c * u, d)
        if w is None:
            raise ContinuationError("no positive subsolution for v; no coexistence state is expected")
        v = w
    box = bound_box(sys)
    U, V = box if box is not None else (BLOWUP, BLOWUP)
    m = 1.0 + float(np.max(np.abs(sys.lam.values) + a * U + b * V))
    m = max(m, 1.0 + float(np.max(np.abs(sys.mu.values) + d * V + c * U)))
    i1, i2 = cp.i1, cp.i2
    f1 = splu((cp.D1 + m * sp.identity(i1.size)).tocsc())
    f2 = splu((cp.D2 + m * sp.identity(i2.size)).tocsc())
    for _ in range(max_iter):
        un = np.zeros(g.n)
        vn = np.zeros(g.n)
        un[i1] = f1.solve(((sys.lam.values + m - a * u + b * v) * u)[i1])
        vn[i2] = f2.solve(((sys.mu.values + m - d * v + c * u) * v)[i2])
        if un.max() > U * (1 + 1e-9) + 1e-12 or vn.max() > V * (1 + 1e-9) + 1e-12:
            raise BoundViolationError(f"monotone iterate left the bound box (U={U:.6g}, V={V:.6g})")
        dist = max(np.abs(un - u).max(), np.abs(vn - v).max())
        u, v = un, vn
        if dist < 1e-10:
            break
    else:
        raise NoConvergenceError("monotone iteration did not settle")
    z, res = cp.newton(cp.pack(u, v), tol=tol)
    return cp, z, res


def _collapsed(cp, z, rel=1e-8):
    """True unless both components are positive and not round-off small."""
    u, v = cp.split(z)
    scale = rel * max(1.0, float(np.abs(z).max()))
    return not (np.all(z > 0) and u.max() > scale and v.max() > scale)


def _competitive(sys: LVSystem, tol, steps=10):
    cp = _Coupled(sys)
    th1, th2 = semitrivial_states(sys)
    if not (np.any(th1.values > 0) and np.any(th2.values > 0)):
        raise ContinuationError("a semitrivial state is missing; the homotopy has no positive start")
    z = cp.pack(th1.values, th2.values)
    s, ds = 0.0, 1.0 / steps
    while s < 1.0:
        trial_s = min(1.0, s + ds)
        try:
            zn, _ = cp.newton(z, trial_s, tol=tol)
        except NoConvergenceError:
            ds *= 0.5
            if ds < 1e-6:
                raise ContinuationError(f"interaction homotopy stalled at strength {s:.6g}") from None
            continue
        if _collapsed(cp, zn):
            raise ContinuationError(f"interaction homotopy left the positive cone at strength {trial_s:.6g}")
        z, s = zn, trial_s
    z, res = cp.newton(z, 1.0, tol=tol)
    return cp, z, res


def coexistence(sys: LVSystem, lam_val=None, mu_val=None, tol: float = 1e-10) -> CoexistenceState:
    """Coexistence state with both components positive.

    Symbiotic systems use monotone iteration upward from the semitrivial
    states, with shifted solves ``(d_i L_i + m)^{-1}``, followed by a Newton
    polish. Competitive systems follow a homotopy in the interaction strength
    from ``(theta1, theta2)`` at strength zero, with Newton at each step.

    Raises
    ------
    BoundViolationError
        If a symbiotic iterate leaves the constant bound box.
    ContinuationError
        If there is no positive start or the homotopy leaves the positive cone.
    """
    s = sys.with_rates(lam_val, mu_val)
    cp, z, res = _symbiotic(s, tol) if s.kind == SYMBIOTIC else _competitive(s, tol)
    if _collapsed(cp, z):
        raise ContinuationError("solver converged to a state that is not positive in both components")
    u, v = cp.full(z)
    sigma = _block_sigma(cp, z)
    return CoexistenceState(Field(s.grid, u), Field(s.grid, v), float(res), sigma)


# ---------------------------------------------------------------------------
# time evolution


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    u_max: list = field(default_factory=list)
    v_max: list = field(default_factory=list)
    dist: list = field(default_factory=list)
    u: Field | None = None
    v: Field | None = None
    status: str = "completed"

    def to_csv(self) -> str:
        lines = ["t,u_max,v_max,dist_to_reference"]
        for row in zip(self.t, self.u_max, self.v_max, self.dist):
            lines.append(",".join(fmt(x) for x in row))
        return "\n".join(lines) + "\n"


def evolve(sys: LVSystem, u0, v0, dt: float = 0.01, t_end: float = 1.0, reference=None, stride: int = 100) -> Trajectory:
    """Semi-implicit Euler for the parabolic system.

    Diffusion is implicit through ``(I + dt d_i L_i)`` solves; reactions are
    explicit. A step is split into equal substeps whenever
    ``dt * |reaction slope|_inf`` would reach 0.5. The run stops early with
    ``status = 'blowup'`` once a sup norm exceeds ``1e6``.
    """
    if not dt > 0 or not t_end >= 0:
        raise ConfigurationError("dt must be positive and t_end nonnegative")
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    if np.any(u < 0) or np.any(v < 0):
        raise PreconditionError("initial data must be nonnegative")
    cp = _Coupled(sys)
    i1, i2 = cp.i1, cp.i2
    u[~np.isin(np.arange(u.size), i1)] = 0.0
    v[~np.isin(np.arange(v.size), i2)] = 0.0
    a, b, c, d = sys.a.values, sys.b.values, sys.c.values, sys.d.values
    lam, mu, k = sys.lam.values, sys.mu.values, sys.sign
    if reference is not None:
        ru = np.asarray(reference[0], dtype=float)
        rv = np.asarray(reference[1], dtype=float)
    factors = {}

    def factor(h):
        if h not in factors:
            factors[h] = (
                splu((sp.identity(i1.size) + h * cp.D1).tocsc()),
                splu((sp.identity(i2.size) + h * cp.D2).tocsc()),
            )
        return factors[h]

    traj = Trajectory()

    def record(t):
        traj.t.append(t)
        traj.u_max.append(float(u.max()))
        traj.v_max.append(float(v.max()))
        if reference is None:
            traj.dist.append(float("nan"))
        else:
            traj.dist.append(float(max(np.abs(u - ru).max(), np.abs(v - rv).max())))

    nsteps = int(round(t_end / dt))
    record(0.0)
    for step in range(1, nsteps + 1):
        slope = max(
            np.abs(lam - 2 * a * u + k * b * v).max() + np.abs(b * u).max(),
            np.abs(mu - 2 * d * v + k * c * u).max() + np.abs(c * v).max(),
        )
        sub = max(1, int(np.ceil(dt * slope / 0.5 + 1e-12)))
        h = dt / sub
        f1, f2 = factor(h)
        for _ in range(sub):
            with np.errstate(over="ignore", invalid="ignore"):
                ru1 = (lam - a * u + k * b * v) * u
                rv1 = (mu - d * v + k * c * u) * v
            un = np.zeros_like(u)
            vn = np.zeros_like(v)
            un[i1] = f1.solve((u + h * ru1)[i1])
            vn[i2] = f2.solve((v + h * rv1)[i2])
            u, v = un, vn
        if u.max() > BLOWUP or v.max() > BLOWUP or not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            traj.status = "blowup"
            record(step * dt)
            break
        if step % stride == 0 or step == nsteps:
            record(step * dt)
    traj.u = Field(sys.grid, u)
    traj.v = Field(sys.grid, v)
    return traj


def random_initial_conditions(grid, count: int, seed: int = SEED, scale: float = 2.0):
    """Strictly positive smooth random initial data, reproducible from ``seed``.

    Each field is ``scale * (0.1 + r0 + r1 cos(pi t) ^ 2)`` with ``t`` the
    normalized coordinate and ``r0, r1`` uniform on ``[0, 1)``.
    """
    rng = np.random.default_rng(seed)
    t = (grid.x - grid.x_lo) / (grid.x_hi - grid.x_lo)
    out = []
    for _ in range(count):
        r = rng.random(4)
        u = scale * (0.1 + r[0] + r[1] * np.cos(np.pi * t) ** 2)
        v = scale * (0.1 + r[2] + r[3] * np.sin(np.pi * t) ** 2)
        out.append((u, v))
    return out
