import functools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.optimize import root

from conftest import cos_problem, dirichlet_cosine, neumann
from picone_lab import scalar_branch as sb
from picone_lab.elliptic import EllipticProblem, assemble, principal_eigenpair
from picone_lab.errors import ConfigurationError, PreconditionError, SeedError
from picone_lab.grid import Field, integrate, make_grid, sample

WINDOW = (0.5, 1.5)


@functools.lru_cache(maxsize=None)
def branch(kind, step=0.05):
    if kind == "p2":
        P = cos_problem(sb.Nonlinearity.power(2))
    elif kind == "p3":
        P = cos_problem(sb.Nonlinearity.power(3))
    elif kind == "nu05":
        P = cos_problem(sb.Nonlinearity.composite(0.05, 2, 3))
    else:
        op = neumann(101)
        P = sb.ScalarProblem(op, sample(op.grid, "1"), sb.Nonlinearity.power(2))
        return P, sb.continue_branch(P, sb.seed_branch(P, 1e-3), step=0.1, max_points=200, lambda_window=(0, 2))
    return P, sb.continue_branch(P, sb.seed_branch(P, 0.01), step=step, max_points=400, lambda_window=WINDOW)


# -- nonlinearities -----------------------------------------------------------


@pytest.mark.parametrize(
    "f", [sb.Nonlinearity.power(2), sb.Nonlinearity.power(3.5), sb.Nonlinearity.composite(0.05, 2, 3), sb.Nonlinearity.ulogu()]
)
def test_derivatives_by_finite_differences(f):
    s = np.linspace(0.2, 3, 15)
    d = 1e-6
    np.testing.assert_allclose(f.fp(s), (f.f(s + d) - f.f(s - d)) / (2 * d), rtol=1e-7)
    np.testing.assert_allclose(f.fpp(s), (f.fp(s + d) - f.fp(s - d)) / (2 * d), rtol=1e-6)


def test_leading_terms():
    assert sb.Nonlinearity.power(2).leading_term() == (2, 1)
    assert sb.Nonlinearity.composite(0.05, 2, 3).leading_term() == (2, 0.05)
    assert sb.Nonlinearity.composite(0, 2, 3).leading_term() == (3, 1)
    with pytest.raises(PreconditionError):
        sb.Nonlinearity.ulogu().leading_term()


def test_nonlinearity_validation():
    with pytest.raises(ConfigurationError):
        sb.Nonlinearity.composite(0.1, 3, 2)
    with pytest.raises(ConfigurationError):
        sb.Nonlinearity.power(0)


# -- residual and Newton ------------------------------------------------------


def test_trivial_branch_residual(cos_p2):
    for lam in (-3.0, 0.0, 2.0):
        assert np.all(sb.residual(cos_p2, lam, np.zeros(cos_p2.grid.n)).values == 0)


def test_constant_logistic_state(logistic):
    u = np.full(logistic.grid.n, 2.0)
    assert np.abs(sb.residual(logistic, 2.0, u).values).max() < 1e-12
    np.testing.assert_allclose(sb.newton_solve(logistic, 2.0, u).values, 2.0)
    np.testing.assert_allclose(sb.newton_solve(logistic, 2.0, np.ones(logistic.grid.n)).values, 2.0, atol=1e-10)


def test_small_amplitude_residual_is_quadratic():
    P = cos_problem(sb.Nonlinearity.power(2), n=401)
    ep = principal_eigenpair(P.op)
    r = [np.abs(sb.residual(P, ep.sigma, e * ep.phi.values).values).max() for e in (1e-2, 5e-3)]
    assert 3.5 <= r[0] / r[1] <= 4.5
    # and equal to the Taylor term a f(eps phi)
    e = 1e-2
    np.testing.assert_allclose(
        sb.residual(P, ep.sigma, e * ep.phi.values).values[1:-1], (P.a.values * (e * ep.phi.values) ** 2)[1:-1], atol=1e-10
    )


def _dense_oracle(lam, guess, n):
    """Root of an independently assembled dense residual for A = 1, Dirichlet."""
    x = np.linspace(-math.pi / 2, math.pi / 2, n)
    h = x[1] - x[0]
    m = n - 2
    T = (np.diag(np.full(m, 2.0)) - np.diag(np.ones(m - 1), 1) - np.diag(np.ones(m - 1), -1)) / h**2
    a = np.cos(x[1:-1]) - 0.9
    F = lambda u: T @ u - lam * u + a * u * u  # noqa: E731
    J = lambda u: T - lam * np.eye(m) + np.diag(2 * a * u)  # noqa: E731
    sol = root(F, guess[1:-1], jac=J, method="hybr", tol=1e-13)
    assert sol.success
    return np.concatenate([[0.0], sol.x, [0.0]])


def test_newton_matches_dense_oracle():
    P, br = branch("p2", 0.1)
    near = min(br.points, key=lambda pt: abs(pt.lam - 0.9))
    guess = near.u.values * 1.02
    u = sb.newton_solve(P, 0.9, guess).values
    ref = _dense_oracle(0.9, guess, P.grid.n)
    assert np.abs(u - ref).max() < 1e-6
    assert sb.stability(P, 0.9, u) < 0  # unstable, so no fixed-point iteration would find it


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(-5, 5), c=st.lists(st.floats(0.1, 2), min_size=3, max_size=3))
def test_jacobian_matches_finite_differences(lam, c):
    P = cos_problem(sb.Nonlinearity.composite(0.3, 2, 3), n=41)
    x = P.grid.x
    u = c[0] + c[1] * np.cos(x) + c[2] * x**2
    J = (assemble(P.op) + sp.diags(-lam + P.a.values * P.f.fp(u))).toarray()
    J[P.op.dirichlet_mask] = np.eye(P.grid.n)[P.op.dirichlet_mask]
    rng = np.random.default_rng(len(c))
    dirn = rng.standard_normal(P.grid.n)
    d = 1e-6
    fd = (sb.residual(P, lam, u + d * dirn).values - sb.residual(P, lam, u - d * dirn).values) / (2 * d)
    scale = np.abs(J @ dirn).max()
    assert np.abs(fd - J @ dirn).max() <= 1e-5 * scale


# -- local analysis at the bifurcation ----------------------------------------


def test_direction_signs():
    p2 = cos_problem(sb.Nonlinearity.power(2), n=2001)
    p3 = cos_problem(sb.Nonlinearity.power(3), n=2001)
    # with the L2-normalized eigenfunction D_p = (2/pi)^((p+1)/2) times the printed integral
    assert sb.bifurcation_direction(p2) == pytest.approx((2 / math.pi) ** 1.5 * -0.0219028, abs=1e-6)
    assert sb.bifurcation_direction(p3) == pytest.approx((2 / math.pi) ** 2 * 0.00637915, abs=1e-6)
    op = dirichlet_cosine(201)
    neg = sb.ScalarProblem(op, sample(op.grid, "-1"), sb.Nonlinearity.power(4))
    assert sb.bifurcation_direction(neg) < 0
    with pytest.raises(PreconditionError):
        sb.bifurcation_direction(p2, p=3)


def test_certificates():
    assert sb.nonexistence_certificate(cos_problem(sb.Nonlinearity.power(2))) == "certified"
    assert sb.nonexistence_certificate(cos_problem(sb.Nonlinearity.power(3))) == "not_applicable"
    op = dirichlet_cosine(101)
    assert sb.nonexistence_certificate(sb.ScalarProblem(op, sample(op.grid, "-1"), sb.Nonlinearity.power(2))) == "certified"
    with pytest.raises(PreconditionError):
        sb.nonexistence_certificate(cos_problem(sb.Nonlinearity.ulogu()))


def test_lambda_star_bound():
    got = sb.lambda_star_bound(cos_problem(sb.Nonlinearity.power(2), n=401))
    length = math.pi / 2 - math.acos(0.9)
    assert got == pytest.approx((math.pi / length) ** 2, rel=1e-3)
    assert got == pytest.approx(7.87, abs=0.01)
    op = EllipticProblem.build(make_grid(0, 1, 101))
    assert sb.lambda_star_bound(sb.ScalarProblem(op, sample(op.grid, "-1 - x"), sb.Nonlinearity.power(2))) == pytest.approx(
        math.pi**2, rel=1e-4
    )
    with pytest.raises(PreconditionError):
        sb.lambda_star_bound(sb.ScalarProblem(op, sample(op.grid, "x"), sb.Nonlinearity.power(2)))


def test_seed_neumann_logistic(logistic):
    seed = sb.seed_branch(logistic, 1e-3)
    # phi0 = 1 on (0, 1), so u = eps and lambda = a u
    assert seed.lam == pytest.approx(1e-3, rel=1e-6)
    np.testing.assert_allclose(seed.u.values, 1e-3, rtol=1e-6)


def test_seed_subcritical(cos_p2):
    seed = sb.seed_branch(cos_p2, 0.01)
    assert seed.lam < principal_eigenpair(cos_p2.op).sigma
    assert np.all(seed.u.values[1:-1] > 0)
    with pytest.raises(SeedError):
        sb.seed_branch(cos_p2, 0.0)


# -- branches -----------------------------------------------------------------


def test_logistic_branch_closed_form():
    P, br = branch("logistic")
    assert not br.folds()
    assert br.terminal == "window"
    for pt in br.points:
        np.testing.assert_allclose(pt.u.values, pt.lam, rtol=1e-7)
        assert pt.stability_sigma == pytest.approx(pt.lam, rel=1e-6)
    assert sb.verify_stable_branch(br).passed


def test_subcritical_branch_stays_left():
    P, br = branch("p2", 0.1)
    assert br.terminal == "window"
    assert all(pt.lam < br.sigma0 for pt in br.points)
    assert all(pt.stability_sigma < 0 for pt in br.points)


def test_composite_branch_on_both_sides():
    P, br = branch("nu05")
    lams = [pt.lam for pt in br.points]
    assert min(lams) < 1 < max(lams)


@pytest.mark.parametrize("kind", ["p3", "nu05"])
def test_folds_are_neutral_and_flip_stability(kind):
    P, br = branch(kind)
    assert br.folds()
    stab = [i for k, i in br.events if k == "stab_change"]
    for k, i in br.events:
        if k != "fold":
            continue
        pt = br.points[i]
        assert abs(pt.stability_sigma) < 1e-6
        assert abs(sb.stability(P, pt.lam, pt.u.values)) < 1e-6
        near = [j for j in stab if abs(br.points[j].s - pt.s) <= br.step]
        assert near, "fold without a nearby stability change"


def test_supercritical_fold_curvature():
    """The p = 3 branch turns back at a quadratic fold with lambda'' < 0."""
    P, br = branch("p3", 0.02)
    (fold,) = br.folds()
    i = next(k for k, pt in enumerate(br.points) if pt.is_fold)
    curv = sb.fold_curvature(P, fold.lam, fold.u.values)
    assert curv < 0
    near = br.points[i - 3 : i + 4]
    s = np.array([pt.s for pt in near]) - fold.s
    fit = np.polyfit(s, [pt.lam for pt in near], 2)
    assert np.sign(fit[0]) == np.sign(curv)
    assert 2 * fit[0] == pytest.approx(curv, rel=0.1)
    # stability derivative along the branch
    dsig = np.polyfit(s, [pt.stability_sigma for pt in near], 2)[1]
    ep = sb.linearized_eigenpair(P, fold.lam, fold.u.values)
    assert dsig == pytest.approx(curv * integrate(Field(P.grid, fold.u.values * ep.phi.values)), rel=0.1)


def test_fold_curvature_needs_neutral_state(cos_p2):
    seed = sb.seed_branch(cos_p2, 0.1)
    with pytest.raises(PreconditionError):
        sb.fold_curvature(cos_p2, seed.lam, seed.u.values)


@pytest.mark.parametrize("kind", ["p2", "p3"])
def test_unstable_at_or_below_sigma0(kind):
    P, br = branch(kind)
    for pt in br.points:
        if pt.lam <= br.sigma0:
            assert pt.stability_sigma < 0


def test_certificate_soundness():
    P, br = branch("p2", 0.1)
    assert sb.nonexistence_certificate(P) == "certified"
    assert max(pt.lam for pt in br.points) < br.sigma0 + sb.FOLD_TOL


def test_stable_branch_audit_flags_duplicates():
    g = make_grid(0, 1, 5)
    pts = [
        sb.BranchPoint(0.0, 1.0, Field(g, 1.0), 0.5),
        sb.BranchPoint(0.1, 1.0, Field(g, 1.2), 0.4),
    ]
    rep = sb.verify_stable_branch(sb.Branch(pts, terminal="window", sigma0=0.0))
    assert not rep.passed and not rep.unique_stable
    assert any("two stable states" in m for m in rep.messages)


def test_stable_branch_audit_flags_low_stable_point():
    g = make_grid(0, 1, 5)
    pts = [sb.BranchPoint(0.0, 0.5, Field(g, 1.0), 0.3)]
    rep = sb.verify_stable_branch(sb.Branch(pts, terminal="max_points", sigma0=1.0))
    assert not rep.stable_above_sigma0 and not rep.terminal_ok


def test_branch_csv():
    P, br = branch("logistic")
    lines = br.to_csv().splitlines()
    assert lines[0] == "s,lambda,u_max,u_l2,stability_sigma,event"
    assert len(lines) == len(br.points) + 1
