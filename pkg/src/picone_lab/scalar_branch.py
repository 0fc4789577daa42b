"""Positive solutions of ``L u = lambda u - a(x) f(u)`` and their continuation.

The discrete residual is ``F(lambda, u) = L u - lambda u + a f(u)`` on the
non-Dirichlet nodes, with ``u = 0`` imposed at Dirichlet ends. Its Jacobian in
``u`` is ``L - lambda + a f'(u)``, whose principal eigenvalue is the linearized
stability of a steady state.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .elliptic import (
    BoundaryCondition,
    EigenPair,
    EllipticProblem,
    active_operator,
    assemble,
    principal_eigenpair,
)
from .errors import (
    ConfigurationError,
    ContinuationError,
    DomainError,
    LabError,
    NoConvergenceError,
    PositivityError,
    PreconditionError,
    SeedError,
)
from .grid import Field, fmt, integrate

FOLD_TOL = 1e-6
BLOWUP = 1e6


# ---------------------------------------------------------------------------
# nonlinearities


def _spow(s, p):
    """Odd extension ``s |s|^(p-1)``; keeps Newton iterates well defined for s < 0."""
    return np.sign(s) * np.abs(s) ** p


@dataclass(frozen=True)
class Nonlinearity:
    """``f`` in ``lambda u - a f(u)``.

    Use the constructors :meth:`power`, :meth:`ulogu` and :meth:`composite`.
    ``PowerLaw`` is ``s^p``, ``ULogU`` is ``s log s`` and ``Composite`` is
    ``nu s^p + s^q`` with ``0 < p < q``.
    """

    form: str
    p: float = 1.0
    q: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if self.form == "PowerLaw":
            if not self.p > 0:
                raise ConfigurationError(f"power law needs p > 0, got {self.p}")
        elif self.form == "Composite":
            if not (0 < self.p < self.q) or self.nu < 0:
                raise ConfigurationError(f"composite needs 0 < p < q and nu >= 0, got p={self.p}, q={self.q}, nu={self.nu}")
        elif self.form != "ULogU":
            raise ConfigurationError(f"unknown nonlinearity {self.form!r}")

    @classmethod
    def power(cls, p):
        return cls("PowerLaw", p=float(p))

    @classmethod
    def ulogu(cls):
        return cls("ULogU")

    @classmethod
    def composite(cls, nu, p, q):
        return cls("Composite", p=float(p), q=float(q), nu=float(nu))

    def f(self, s):
        s = np.asarray(s, dtype=float)
        if self.form == "PowerLaw":
            return _spow(s, self.p)
        if self.form == "Composite":
            return self.nu * _spow(s, self.p) + _spow(s, self.q)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, s * np.log(np.where(a > 0, a, 1.0)), 0.0)

    def fp(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "PowerLaw":
                return self.p * a ** (self.p - 1)
            if self.form == "Composite":
                return self.nu * self.p * a ** (self.p - 1) + self.q * a ** (self.q - 1)
            return np.log(np.where(a > 0, a, np.finfo(float).tiny)) + 1.0

    def fpp(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        sg = np.sign(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "PowerLaw":
                return self.p * (self.p - 1) * sg * a ** (self.p - 2)
            if self.form == "Composite":
                return sg * (self.nu * self.p * (self.p - 1) * a ** (self.p - 2) + self.q * (self.q - 1) * a ** (self.q - 2))
            return 1.0 / np.where(a > 0, s, np.finfo(float).tiny)

    def leading_term(self):
        """Exponent ``p`` and the finite nonzero limit of ``f(s)/s^p`` as ``s -> 0+``."""
        if self.form == "PowerLaw":
            return self.p, 1.0
        if self.form == "Composite":
            return (self.p, self.nu) if self.nu > 0 else (self.q, 1.0)
        raise PreconditionError("s log s has no power-law leading term")


# ---------------------------------------------------------------------------
# problems and residuals


@dataclass(frozen=True)
class ScalarProblem:
    op: EllipticProblem
    a: Field
    f: Nonlinearity

    def __post_init__(self):
        if not isinstance(self.a, Field):
            from .grid import sample

            object.__setattr__(self, "a", sample(self.op.grid, self.a))
        if not np.any(self.a.values != 0):
            raise ConfigurationError("the weight a must not vanish identically")

    @property
    def grid(self):
        return self.op.grid


def residual(sp_: ScalarProblem, lam: float, u) -> Field:
    """``Lu - lambda u + a f(u)`` nodewise; Dirichlet rows hold ``u`` itself."""
    u = np.asarray(u, dtype=float)
    fu = sp_.f.f(u)
    if not np.all(np.isfinite(fu)):
        raise DomainError("f(u) is not finite")
    r = assemble(sp_.op) @ u - lam * u + sp_.a.values * fu
    mask = sp_.op.dirichlet_mask
    r[mask] = u[mask]
    return Field(sp_.grid, r)


def _res_active(sp_, lam, u_act, idx, L):
    return L @ u_act - lam * u_act + sp_.a.values[idx] * sp_.f.f(u_act)


def _jac_active(sp_, lam, u_act, idx, L):
    return (L + sp.diags(sp_.a.values[idx] * sp_.f.fp(u_act) - lam)).tocsc()


def _tol_scale(u):
    return max(1.0, float(np.abs(u).max()))


def _solve(J, rhs):
    """Sparse solve; ``None`` when ``J`` is numerically singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        x = spsolve(J, rhs)
    return x if np.all(np.isfinite(x)) else None


def _regularized_step(J, F, nrm, res, u):
    scale = max(1.0, float(np.abs(J.diagonal()).max()))
    eye = sp.identity(J.shape[0], format="csc")
    for tau in scale * 10.0 ** np.arange(-8, 3):
        du = _solve((J + tau * eye).tocsc(), -F)
        if du is None:
            continue
        trial = u + du
        Ft = res(trial)
        nt = np.abs(Ft).max()
        if nt < nrm:
            return trial, Ft, nt
    return None


def _newton(sp_, lam, u_act, tol, max_iter, damping=True):
    idx = sp_.op.active
    L = active_operator(sp_.op)
    u = u_act.copy()
    F = _res_active(sp_, lam, u, idx, L)
    nrm = np.abs(F).max()
    for it in range(max_iter + 1):
        if nrm <= tol * _tol_scale(u):
            return u, it
        if it == max_iter:
            break
        J = _jac_active(sp_, lam, u, idx, L)
        du = _solve(J, -F)
        nt = np.inf
        if du is not None:
            t = 1.0
            while True:
                trial = u + t * du
                Ft = _res_active(sp_, lam, trial, idx, L)
                nt = np.abs(Ft).max()
                if nt < nrm or not damping or t < 1e-4:
                    break
                t *= 0.5
        if damping and not nt < nrm:
            # singular or useless Jacobian: regularized steps (J + tau I) du = -F
            found = _regularized_step(J, F, nrm, lambda z: _res_active(sp_, lam, z, idx, L), u)
            if found is None:
                break
            trial, Ft, nt = found
        u, F, nrm = trial, Ft, nt
    raise NoConvergenceError(f"Newton did not converge at lambda = {lam:.6g} (residual {nrm:.3e})", residual=float(nrm))


def _full(sp_, u_act):
    u = np.zeros(sp_.grid.n)
    u[sp_.op.active] = u_act
    return u


def newton_solve(sp_: ScalarProblem, lam: float, u0, tol: float = 1e-9, max_iter: int = 50) -> Field:
    """Damped Newton for a fixed ``lambda``.

    Convergence means ``|F|_inf <= tol * max(1, |u|_inf)``.

    Raises
    ------
    NoConvergenceError
        If the iteration stalls.
    PositivityError
        If it converges to a state that is not positive at the active nodes.
    """
    idx = sp_.op.active
    u, _ = _newton(sp_, float(lam), np.asarray(u0, dtype=float)[idx], tol, max_iter)
    if not np.all(u > 0):
        raise PositivityError(f"Newton converged to a non-positive state at lambda = {lam:.6g} (min {u.min():.3e})")
    return Field(sp_.grid, _full(sp_, u))


# ---------------------------------------------------------------------------
# local analysis


def linearized_eigenpair(sp_: ScalarProblem, lam: float, u) -> EigenPair:
    u = np.asarray(u, dtype=float)
    V = -lam + sp_.a.values * sp_.f.fp(u)
    return principal_eigenpair(sp_.op.with_potential(V))


def stability(sp_: ScalarProblem, lam: float, u) -> float:
    """Principal eigenvalue of ``L - lambda + a f'(u)``; positive means linearly stable."""
    return linearized_eigenpair(sp_, lam, u).sigma


def bifurcation_direction(sp_: ScalarProblem, p: float | None = None) -> float:
    """``D_p = lim f(s)/s^p * int a phi0^(p+1)`` with ``int phi0^2 = 1``.

    Positive means the positive branch leaves ``(sigma0, 0)`` to the right.
    ``p`` defaults to the leading exponent of ``f``; passing a different one is
    an error because the limit would be zero or infinite.
    """
    expo, limit = sp_.f.leading_term()
    if p is not None and not np.isclose(p, expo):
        raise PreconditionError(f"f(s)/s^{p:g} has no finite nonzero limit; the leading exponent is {expo:g}")
    phi = principal_eigenpair(sp_.op).phi.values
    return limit * integrate(Field(sp_.grid, sp_.a.values * phi ** (expo + 1)))


def nonexistence_certificate(sp_: ScalarProblem) -> str:
    """``'certified'`` when ``int a phi0^(p+1) <= 0`` for ``f = s^p``, ``p > 1``.

    In that case no positive solution exists with ``lambda >= sigma0``.
    """
    if sp_.f.form != "PowerLaw" or not sp_.f.p > 1:
        raise PreconditionError("the certificate needs f = s^p with p > 1")
    return "certified" if bifurcation_direction(sp_) <= 0 else "not_applicable"


def lambda_star_bound(sp_: ScalarProblem) -> float:
    """Upper bound for the end of the stable branch.

    Minimum of the Dirichlet principal eigenvalue of ``L`` over the maximal
    intervals where ``a < 0``. The zero crossings of ``a`` are located by
    linear interpolation between nodes.
    """
    g = sp_.grid
    a = sp_.a.values
    x = g.x
    neg = a < 0
    if not neg.any():
        raise PreconditionError("a is nonnegative everywhere; no negative subinterval")
    best = np.inf
    i = 0
    while i < g.n:
        if not neg[i]:
            i += 1
            continue
        j = i
        while j + 1 < g.n and neg[j + 1]:
            j += 1
        lo = x[i] if i == 0 else x[i - 1] + (x[i] - x[i - 1]) * a[i - 1] / (a[i - 1] - a[i])
        hi = x[j] if j == g.n - 1 else x[j] + (x[j + 1] - x[j]) * a[j] / (a[j] - a[j + 1])
        best = min(best, _dirichlet_sigma(sp_.op, lo, hi))
        i = j + 1
    return float(best)


def _dirichlet_sigma(op, lo, hi, n=401):
    from .grid import make_grid

    sub = make_grid(lo, hi, n)
    xs = op.grid.x
    A = np.interp(sub.x, xs, op.A.values)
    C = np.interp(sub.x, xs, op.C.values)
    p = EllipticProblem(sub, Field(sub, A), Field(sub, C), BoundaryCondition.dirichlet(), BoundaryCondition.dirichlet())
    return principal_eigenpair(p).sigma


def fold_curvature(sp_: ScalarProblem, lam0: float, u0, tol: float = FOLD_TOL) -> float:
    """Second derivative of ``lambda`` along the curve through a neutral state.

    Returns ``int a psi0^3 f''(u0) / int u0 psi0`` with ``psi0`` the principal
    eigenfunction of the linearization, ``int psi0^2 = 1``.

    Raises
    ------
    PreconditionError
        If the state is not neutrally stable within ``tol``.
    """
    u0 = np.asarray(u0, dtype=float)
    ep = linearized_eigenpair(sp_, lam0, u0)
    if abs(ep.sigma) > tol:
        raise PreconditionError(f"state is not neutrally stable: sigma = {ep.sigma:.3e} exceeds {tol:.1e}")
    psi = ep.phi.values
    num = integrate(Field(sp_.grid, sp_.a.values * psi**3 * sp_.f.fpp(u0)))
    den = integrate(Field(sp_.grid, u0 * psi))
    return float(num / den)


# ---------------------------------------------------------------------------
# branches


@dataclass
class BranchPoint:
    s: float
    lam: float
    u: Field
    stability_sigma: float
    is_fold: bool = False
    event: str = "none"
    tangent_lambda: float = 0.0

    @property
    def u_max(self):
        return float(np.abs(self.u.values).max())

    @property
    def u_l2(self):
        return float(np.sqrt(integrate(Field(self.u.grid, self.u.values**2))))


@dataclass
class Branch:
    points: list = field(default_factory=list)
    events: list = field(default_factory=list)  # (kind, index)
    terminal: str = "max_points"
    sigma0: float = float("nan")
    step: float = float("nan")

    def folds(self):
        return [self.points[i] for k, i in self.events if k == "fold"]

    def to_csv(self) -> str:
        lines = ["s,lambda,u_max,u_l2,stability_sigma,event"]
        for pt in self.points:
            lines.append(",".join([fmt(pt.s), fmt(pt.lam), fmt(pt.u_max), fmt(pt.u_l2), fmt(pt.stability_sigma), pt.event]))
        return "\n".join(lines) + "\n"


def _bordered(J, col, row, corner):
    n = J.shape[0]
    top = sp.hstack([J, sp.csc_matrix(col.reshape(n, 1))])
    bottom = sp.csc_matrix(np.append(row, corner).reshape(1, n + 1))
    return sp.vstack([top, bottom]).tocsc()


def seed_branch(sp_: ScalarProblem, eps: float, tol: float = 1e-9) -> BranchPoint:
    """A small positive solution near ``(sigma0, eps phi0)``.

    The guess ``lambda = sigma0 + D eps^(p-1)``, ``u = eps phi0`` is refined by
    Newton on the pair ``(lambda, u)`` with the amplitude pinned through
    ``int phi0 u = eps``.

    Raises
    ------
    SeedError
        If ``eps`` is not positive or the refinement fails.
    """
    if not eps > 0:
        raise SeedError(f"seed amplitude must be positive, got {eps!r}")
    op = sp_.op
    idx = op.active
    w = op.grid.weights[idx]
    ep = principal_eigenpair(op)
    phi = ep.phi.values[idx]
    try:
        expo, _ = sp_.f.leading_term()
        lam = ep.sigma + bifurcation_direction(sp_) * eps ** (expo - 1)
    except PreconditionError:
        lam = ep.sigma
    u = eps * phi
    L = active_operator(op)
    for _ in range(60):
        F = _res_active(sp_, lam, u, idx, L)
        pin = np.dot(w * phi, u) - eps
        if np.abs(F).max() <= tol * _tol_scale(u) and abs(pin) <= 1e-12 * eps:
            break
        K = _bordered(_jac_active(sp_, lam, u, idx, L), -u, w * phi, 0.0)
        d = spsolve(K, -np.append(F, pin))
        u, lam = u + d[:-1], lam + d[-1]
    else:
        raise SeedError(f"seed refinement did not converge for eps = {eps:g}; try a smaller eps")
    if not np.all(u > 0):
        raise SeedError(f"seed solution is not positive for eps = {eps:g}; try a smaller eps")
    full = _full(sp_, u)
    return BranchPoint(0.0, float(lam), Field(sp_.grid, full), stability(sp_, lam, full))


class _Continuation:
    """Pseudo-arclength machinery on the active unknowns ``(u, lambda)``."""

    def __init__(self, sp_, tol):
        self.sp = sp_
        self.idx = sp_.op.active
        self.w = sp_.grid.weights[self.idx]
        self.L = active_operator(sp_.op)
        self.tol = tol

    def dot(self, a, b):
        return float(np.dot(self.w * a[:-1], b[:-1]) + a[-1] * b[-1])

    def normalize(self, t):
        return t / np.sqrt(self.dot(t, t))

    def jac(self, z):
        return _jac_active(self.sp, z[-1], z[:-1], self.idx, self.L)

    def tangent(self, z, ref):
        """Unit tangent with positive weighted product against ``ref``."""
        K = _bordered(self.jac(z), -z[:-1], self.w * ref[:-1], ref[-1])
        rhs = np.zeros(z.size)
        rhs[-1] = 1.0
        t = spsolve(K, rhs)
        return self.normalize(t)

    def correct(self, z0, t0, ds, max_iter=10):
        """Newton on ``F = 0`` plus ``<t0, z - z0> = ds`` from the predictor."""
        z = z0 + ds * t0
        for it in range(max_iter):
            u, lam = z[:-1], z[-1]
            F = _res_active(self.sp, lam, u, self.idx, self.L)
            N = self.dot(t0, z - z0) - ds
            if np.abs(F).max() <= self.tol * _tol_scale(u) and abs(N) <= 1e-12 * max(1.0, abs(ds)):
                return z, it
            K = _bordered(self.jac(z), -u, self.w * t0[:-1], t0[-1])
            d = spsolve(K, -np.append(F, N))
            if not np.all(np.isfinite(d)):
                break
            z = z + d
        raise NoConvergenceError("corrector failed")

    def sigma(self, z):
        return stability(self.sp, z[-1], _full(self.sp, z[:-1]))


def continue_branch(
    sp_: ScalarProblem,
    seed: BranchPoint,
    step: float = 0.05,
    max_points: int = 400,
    lambda_window=(-np.inf, np.inf),
    blowup: float = BLOWUP,
    tol: float = 1e-9,
    fold_tol: float = FOLD_TOL,
) -> Branch:
    """Pseudo-arclength continuation of the positive branch through ``seed``.

    The arclength uses the trapezoid-weighted norm on ``u`` and unit weight on
    ``lambda``. The step never exceeds ``step``; it is halved when the
    corrector fails and regrown after easy steps. Folds (sign changes of
    ``d lambda / ds``) are refined by secant iteration and inserted as extra
    points; sign changes of the stability value are recorded as
    ``stab_change`` events.

    Stops at the ``lambda`` window edge (``terminal = 'window'``), when
    ``|u|_inf`` exceeds ``blowup`` (``'blowup'``), after ``max_points``
    (``'max_points'``) or when the step collapses (``'stalled'``).

    Raises
    ------
    ContinuationError
        If not even the first step succeeds.
    """
    lo_w, hi_w = float(lambda_window[0]), float(lambda_window[1])
    ct = _Continuation(sp_, tol)
    idx = ct.idx
    sigma0 = principal_eigenpair(sp_.op).sigma
    z = np.append(seed.u.values[idx], seed.lam)
    ref = np.append(sp_.grid.weights[idx] * 0 + 1.0, 0.0)  # increasing amplitude
    t = ct.tangent(z, ref)
    branch = Branch(sigma0=sigma0, step=step)
    first = BranchPoint(0.0, seed.lam, seed.u, ct.sigma(z), tangent_lambda=float(t[-1]))
    branch.points.append(first)
    ds = step
    s = 0.0
    min_ds = step * 1e-6

    while len(branch.points) < max_points:
        try:
            z_new, iters = ct.correct(z, t, ds)
            if not np.all(z_new[:-1] > 0):
                raise PositivityError("left the positive cone")
        except (LabError, RuntimeError, np.linalg.LinAlgError):
            ds *= 0.5
            if ds < min_ds:
                if len(branch.points) == 1:
                    raise ContinuationError("continuation failed at the seed") from None
                branch.terminal = "stalled"
                break
            continue
        lam_new = z_new[-1]
        if not lo_w <= lam_new <= hi_w:
            branch.terminal = "window"
            break
        t_new = ct.tangent(z_new, t)
        s_new = s + ds
        prev = branch.points[-1]
        pt = BranchPoint(s_new, float(lam_new), Field(sp_.grid, _full(sp_, z_new[:-1])), ct.sigma(z_new), tangent_lambda=float(t_new[-1]))

        if np.sign(t_new[-1]) != np.sign(t[-1]) and t[-1] != 0:
            fold = _refine_fold(ct, z, t, s, ds, fold_tol)
            if fold is not None:
                fold.is_fold = True
                fold.event = "fold"
                branch.points.append(fold)
                branch.events.append(("fold", len(branch.points) - 1))
                prev = fold
        if np.sign(pt.stability_sigma) != np.sign(prev.stability_sigma) or (
            prev.is_fold and np.sign(pt.stability_sigma) != np.sign(branch.points[-2].stability_sigma)
        ):
            pt.event = "stab_change"
            branch.events.append(("stab_change", len(branch.points)))
        branch.points.append(pt)
        z, t, s = z_new, t_new, s_new
        if pt.u_max > blowup:
            branch.terminal = "blowup"
            break
        if iters <= 3:
            ds = min(step, 1.5 * ds)
    return branch


def _refine_fold(ct, z0, t0, s0, ds, fold_tol, max_iter=40):
    """Locate ``d lambda / ds = 0`` between ``s0`` and ``s0 + ds`` by secant steps."""

    def point(h):
        z, _ = ct.correct(z0, t0, h)
        tt = ct.tangent(z, t0)
        return z, tt

    a, b = 0.0, ds
    fa = t0[-1]
    try:
        zb, tb = point(b)
    except LabError:
        return None
    fb = tb[-1]
    best = None
    for _ in range(max_iter):
        c = b - fb * (b - a) / (fb - fa)
        if not (min(a, b) < c < max(a, b)):
            c = 0.5 * (a + b)
        try:
            zc, tc = point(c)
        except LabError:
            return None
        fc = tc[-1]
        sig = ct.sigma(zc)
        best = (c, zc, tc, sig)
        if abs(fc) < 1e-12 or abs(sig) < 1e-3 * fold_tol or abs(b - a) < 1e-14:
            break
        # keep a bracket (Illinois modification of regula falsi)
        if np.sign(fc) == np.sign(fb):
            fa *= 0.5
        else:
            a, fa = b, fb
        b, fb = c, fc
    c, zc, tc, sig = best
    return BranchPoint(s0 + c, float(zc[-1]), Field(ct.sp.grid, _full(ct.sp, zc[:-1])), sig, tangent_lambda=float(tc[-1]))


# ---------------------------------------------------------------------------
# stable-branch audit


@dataclass
class StableBranchReport:
    stable_above_sigma0: bool
    monotone_stable: bool
    unique_stable: bool
    terminal_ok: bool
    terminal: str
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return self.stable_above_sigma0 and self.monotone_stable and self.unique_stable and self.terminal_ok

    def to_dict(self):
        return {
            "passed": self.passed,
            "stable_above_sigma0": self.stable_above_sigma0,
            "monotone_stable": self.monotone_stable,
            "unique_stable": self.unique_stable,
            "terminal_ok": self.terminal_ok,
            "terminal": self.terminal,
            "messages": list(self.messages),
        }


def verify_stable_branch(branch: Branch, sigma0: float | None = None, lam_tol: float = 1e-9) -> StableBranchReport:
    """Audit a computed branch against the stable-branch properties.

    Checks that (a) stable points sit at ``lambda > sigma0``, (b) ``u`` grows
    pointwise with ``lambda`` along stable stretches, (c) no two stable
    points share a ``lambda`` value, and (d) the branch ended at a fold,
    a blowup or the window edge. Violations are reported, never raised.
    """
    sigma0 = branch.sigma0 if sigma0 is None else sigma0
    msgs = []
    stable = [pt for pt in branch.points if pt.stability_sigma > FOLD_TOL]

    a_ok = True
    for pt in stable:
        if not pt.lam > sigma0:
            a_ok = False
            msgs.append(f"stable point at lambda = {pt.lam:.6g} <= sigma0 = {sigma0:.6g}")

    b_ok = True
    ordered = sorted(stable, key=lambda pt: pt.lam)
    for p1, p2 in zip(ordered, ordered[1:]):
        if p2.lam - p1.lam > lam_tol and np.any(p2.u.values < p1.u.values - 1e-9 * _tol_scale(p2.u.values)):
            b_ok = False
            msgs.append(f"stable states not ordered between lambda = {p1.lam:.6g} and {p2.lam:.6g}")

    c_ok = True
    for p1, p2 in zip(ordered, ordered[1:]):
        if abs(p2.lam - p1.lam) <= lam_tol:
            c_ok = False
            msgs.append(f"two stable states at lambda = {p1.lam:.6g}")

    d_ok = branch.terminal in ("fold", "blowup", "window") or any(k == "fold" for k, _ in branch.events)
    if not d_ok:
        msgs.append(f"branch ended by {branch.terminal!r}")
    return StableBranchReport(a_ok, b_ok, c_ok, d_ok, branch.terminal, msgs)
