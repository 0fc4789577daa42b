"""Divergence-form operators ``L u = -(A u')' + C u`` on a uniform grid.

Dirichlet endpoints become identity rows. Robin endpoints use a half-cell
flux balance, which is the same as eliminating a ghost node and keeps the
scheme globally second order. With trapezoid weights ``w`` the weighted
matrix ``diag(w) L`` is symmetric, and when ``A > 0`` the operator restricted
to the non-Dirichlet nodes is a Z-matrix. The principal eigenvalue engine
relies on that structure.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, EllipticityError, IterationError, ShiftError
from .grid import Field, Grid, sample

DIRICHLET = "Dirichlet"
ROBIN = "Robin"


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition at one endpoint.

    ``Robin`` means ``A du/dnu + beta u = 0`` with ``nu`` the outward normal, so
    ``-A u' + beta u = 0`` on the left and ``A u' + beta u = 0`` on the right.
    ``beta`` may have any sign; ``beta = 0`` is the Neumann condition.
    """

    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in (DIRICHLET, ROBIN):
            raise ConfigurationError(f"boundary kind must be 'Dirichlet' or 'Robin', got {self.kind!r}")
        if self.kind == DIRICHLET and self.beta is not None:
            raise ConfigurationError("a Dirichlet condition carries no beta")
        if self.kind == ROBIN:
            if self.beta is None:
                object.__setattr__(self, "beta", 0.0)
            object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def dirichlet(cls):
        return cls(DIRICHLET)

    @classmethod
    def robin(cls, beta=0.0):
        return cls(ROBIN, beta)

    @classmethod
    def neumann(cls):
        return cls(ROBIN, 0.0)

    @property
    def is_dirichlet(self):
        return self.kind == DIRICHLET


@dataclass(frozen=True)
class EllipticProblem:
    """Operator data: diffusion ``A``, potential ``C`` and endpoint conditions.

    ``allow_indefinite`` skips the ``min(A) > 0`` check. It exists for identity
    checks that do not need an eigenvalue, where ``A`` may change sign.
    """

    grid: Grid
    A: Field
    C: Field
    bc_left: BoundaryCondition
    bc_right: BoundaryCondition
    allow_indefinite: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("A", "C"):
            f = getattr(self, name)
            if not isinstance(f, Field):
                object.__setattr__(self, name, sample(self.grid, f))
            elif f.grid.n != self.grid.n:
                raise ConfigurationError(f"{name} lives on a grid with {f.grid.n} nodes, expected {self.grid.n}")
        amin = float(self.A.values.min())
        if not self.allow_indefinite and not amin > 0:
            i = int(np.argmin(self.A.values))
            raise EllipticityError(f"diffusion must be positive, min A = {amin:.6g} at x = {self.grid.x[i]:.6g}")

    @classmethod
    def build(cls, grid, A="1", C="0", bc_left=None, bc_right=None, allow_indefinite=False):
        """Convenience constructor taking expressions; both ends default to Dirichlet."""
        return cls(
            grid,
            sample(grid, A),
            sample(grid, C),
            bc_left or BoundaryCondition.dirichlet(),
            bc_right or BoundaryCondition.dirichlet(),
            allow_indefinite,
        )

    def with_potential(self, V) -> "EllipticProblem":
        """The same problem with ``C`` replaced by ``C + V``."""
        V = np.asarray(V, dtype=float)
        return EllipticProblem(self.grid, self.A, self.C.with_values(self.C.values + V), self.bc_left, self.bc_right, self.allow_indefinite)

    @property
    def dirichlet_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid.n, dtype=bool)
        mask[0] = self.bc_left.is_dirichlet
        mask[-1] = self.bc_right.is_dirichlet
        return mask

    @property
    def active(self) -> np.ndarray:
        """Indices of the nodes that carry unknowns (everything but Dirichlet ends)."""
        return np.flatnonzero(~self.dirichlet_mask)


@dataclass(frozen=True)
class EigenPair:
    sigma: float
    phi: Field
    residual: float
    iterations: int = 0

    def strongly_positive(self, p: EllipticProblem) -> bool:
        """Discrete form of strong positivity.

        Strictly positive at every non-Dirichlet node, with a strictly positive
        one-sided slope into the domain at each Dirichlet end.
        """
        phi = self.phi.values
        ok = bool(np.all(phi[p.active] > 0))
        if p.bc_left.is_dirichlet:
            ok &= phi[1] - phi[0] > 0
        if p.bc_right.is_dirichlet:
            ok &= phi[-2] - phi[-1] > 0
        return ok


def _tridiagonal(p: EllipticProblem):
    """Return (lower, diag, upper) of the full n x n operator."""
    g = p.grid
    n, h = g.n, g.h
    A, C = p.A.values, p.C.values
    am = 0.5 * (A[1:] + A[:-1])  # A at midpoints i+1/2
    diag = np.empty(n)
    lower = np.zeros(n - 1)  # entry (i+1, i)
    upper = np.zeros(n - 1)  # entry (i, i+1)
    diag[1:-1] = (am[1:] + am[:-1]) / h**2 + C[1:-1]
    upper[1:] = -am[1:] / h**2
    lower[:-1] = -am[:-1] / h**2

    if p.bc_left.is_dirichlet:
        diag[0], upper[0] = 1.0, 0.0
    else:
        diag[0] = 2 * am[0] / h**2 + 2 * p.bc_left.beta / h + C[0]
        upper[0] = -2 * am[0] / h**2
    if p.bc_right.is_dirichlet:
        diag[-1], lower[-1] = 1.0, 0.0
    else:
        diag[-1] = 2 * am[-1] / h**2 + 2 * p.bc_right.beta / h + C[-1]
        lower[-1] = -2 * am[-1] / h**2
    return lower, diag, upper


def assemble(p: EllipticProblem) -> sp.csr_matrix:
    """Assemble the tridiagonal operator as a sparse ``n x n`` matrix.

    Interior rows are the conservative three-point stencil with arithmetic
    midpoint diffusion. Dirichlet rows are identity rows (``u = 0`` is imposed
    by a zero right-hand side). Robin rows hold the half-cell balance
    ``(2/h^2) A_{1/2} (u_0 - u_1) + (2/h) beta u_0 + C_0 u_0``.
    """
    lower, diag, upper = _tridiagonal(p)
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


def active_operator(p: EllipticProblem) -> sp.csr_matrix:
    """The operator restricted to non-Dirichlet nodes."""
    idx = p.active
    return assemble(p)[idx][:, idx].tocsr()


# ---------------------------------------------------------------------------
# M-matrix factorization and inverse iteration


class _Factor:
    """LU of a sparse Z-matrix without pivoting.

    For a Z-matrix the unpivoted LU has positive pivots exactly when the
    matrix is a nonsingular M-matrix. That is the check we need before trusting
    a shifted inverse to be positivity preserving.
    """

    def __init__(self, M: sp.spmatrix):
        M = sp.csc_matrix(M)
        self.ok = False
        try:
            lu = splu(M, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        except RuntimeError:
            return
        n = M.shape[0]
        if not (np.array_equal(lu.perm_r, np.arange(n)) and np.array_equal(lu.perm_c, np.arange(n))):
            return
        piv = lu.U.diagonal()
        if np.all(np.isfinite(piv)) and np.all(piv > 0):
            self.ok = True
            self.lu = lu

    def solve(self, rhs):
        return self.lu.solve(rhs)


def _check_z_matrix(M: sp.spmatrix):
    off = sp.coo_matrix(M)
    mask = off.row != off.col
    if np.any(off.data[mask] > 0):
        raise EllipticityError("operator is not a Z-matrix (positive off-diagonal entries); the principal eigenvalue engine needs A > 0 and cooperative coupling")


def principal_eigen(
    M: sp.spmatrix,
    weights=None,
    shift: float | None = None,
    tol: float = 1e-10,
    residual_tol: float = 1e-8,
    max_iter: int = 500,
):
    """Principal eigenpair of a sparse irreducible Z-matrix.

    Shifted inverse iteration from the all-ones vector. After every solve the
    Collatz-Wielandt ratios bracket the principal eigenvalue from below, and
    the shift is moved up to just beyond that bound. The new shift is kept only
    if the shifted matrix still factors as an M-matrix, so the iteration stays
    on the positive eigenvector.

    Parameters
    ----------
    M : sparse matrix
        Z-matrix, irreducible.
    weights : array, optional
        Inner-product weights making ``M`` self-adjoint. When given, the
        eigenvalue estimate is the weighted Rayleigh quotient; otherwise the
        plain quotient ``x.Mx / x.x`` is used.
    shift : float, optional
        Initial shift ``m`` with ``M + m I`` an M-matrix. Defaults to
        ``1 + max(0, -min(rowsum))``; increased automatically if needed.
    tol, residual_tol : float
        Stop when the eigenvalue increment is at most ``tol * max(1, |sigma|)``
        and the relative residual ``|Mx - sigma x|_inf / |x|_inf`` is at most
        ``residual_tol``.

    Returns
    -------
    sigma : float
    vec : ndarray
        Positive eigenvector scaled to unit max norm.
    residual : float
    iterations : int
    """
    M = sp.csr_matrix(M, dtype=float)
    n = M.shape[0]
    _check_z_matrix(M)
    eye = sp.identity(n, format="csr")
    if shift is None:
        rowsum = np.asarray(M.sum(axis=1)).ravel()
        shift = 1.0 + max(0.0, -float(rowsum.min()))
    m = float(shift)
    fac = _Factor(M + m * eye)
    grow = 0
    while not fac.ok:
        grow += 1
        if grow > 200:
            raise ShiftError("could not find a shift making the operator an M-matrix")
        m = 2.0 * m + 1.0
        fac = _Factor(M + m * eye)

    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    x = np.ones(n)
    sigma = np.inf
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = fac.solve(x)
        if not np.all(y > 0):
            # rounding near a singular shift; back off and retry this step
            m = m + max(1e-3, 1e-3 * abs(m))
            fac = _Factor(M + m * eye)
            if not fac.ok:
                raise IterationError("inverse iteration lost positivity", residual=residual)
            continue
        ratio = y / x
        lo = 1.0 / ratio.max() - m  # lower Collatz-Wielandt bound on sigma
        x = y / np.abs(y).max()
        Mx = M @ x
        new_sigma = float(np.dot(w * x, Mx) / np.dot(w * x, x))
        residual = float(np.abs(Mx - new_sigma * x).max())
        done = abs(new_sigma - sigma) <= tol * max(1.0, abs(new_sigma)) and residual <= residual_tol
        sigma = new_sigma
        if done:
            return sigma, x, residual, it
        # accelerate: shift to just past the rigorous lower bound
        target = -lo + 1e-6 * (1.0 + abs(lo))
        if target < m - 1e-12 * (1.0 + abs(m)):
            trial = _Factor(M + target * eye)
            if trial.ok:
                m, fac = target, trial
    raise IterationError(f"principal eigenpair did not converge in {max_iter} iterations (residual {residual:.3e})", residual=residual)


def _scatter(p: EllipticProblem, vals) -> np.ndarray:
    full = np.zeros(p.grid.n)
    full[p.active] = vals
    return full


def principal_eigenpair(p: EllipticProblem, tol: float = 1e-10, residual_tol: float = 1e-8) -> EigenPair:
    """Principal eigenvalue and positive eigenfunction of ``L``.

    The eigenfunction is normalized so that its trapezoid ``L2`` norm is one.
    The starting shift is ``1 + max(0, -min C)``.

    Raises
    ------
    IterationError
        If the iteration does not converge.
    """
    if p.allow_indefinite and not p.A.values.min() > 0:
        raise EllipticityError("principal eigenpair needs A > 0")
    M = active_operator(p)
    weights = p.grid.weights[p.active]
    shift = 1.0 + max(0.0, -float(p.C.values.min()))
    sigma, vec, _, iters = principal_eigen(M, weights, shift, tol, residual_tol)
    phi = _scatter(p, vec)
    phi /= np.sqrt(np.dot(p.grid.weights, phi**2))
    res = float(np.abs(M @ phi[p.active] - sigma * phi[p.active]).max() / np.abs(phi).max())
    return EigenPair(sigma, Field(p.grid, phi), res, iters)


def principal_eigenvalue_with_potential(p: EllipticProblem, V, tol: float = 1e-10) -> float:
    """Principal eigenvalue of ``L + V`` under the same boundary conditions."""
    return principal_eigenpair(p.with_potential(V), tol).sigma


def solve_shifted(p: EllipticProblem, m: float, rhs) -> Field:
    """Solve ``(L + m) u = rhs`` with ``u = 0`` at Dirichlet ends.

    The shift must make ``L + m`` positive definite, which for these operators
    is the same as being a nonsingular M-matrix.

    Raises
    ------
    ShiftError
        If ``m`` does not exceed ``-sigma_0``; the estimate of ``sigma_0`` is
        attached.
    """
    rhs = np.asarray(rhs, dtype=float)
    idx = p.active
    M = active_operator(p) + float(m) * sp.identity(idx.size, format="csr")
    fac = _Factor(M)
    if not fac.ok:
        try:
            est = principal_eigenpair(p).sigma
        except Exception:
            est = None
        raise ShiftError(
            f"L + m is not positive definite for m = {m:.6g}" + ("" if est is None else f" (estimated sigma_0 = {est:.6g})"),
            sigma_estimate=est,
        )
    return Field(p.grid, _scatter(p, fac.solve(rhs[idx])))
