import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from conftest import dirichlet_cosine, neumann
from picone_lab import lotka_volterra as lv
from picone_lab.elliptic import active_operator
from picone_lab.errors import ContinuationError, DomainError, PreconditionError
from picone_lab.grid import Field, make_grid, sample


def system(kind, lam, mu, a, b, c, d, op=None, d1="1", d2="1"):
    op = op or neumann(101)
    g = op.grid
    F = lambda e: sample(g, e)  # noqa: E731
    return lv.LVSystem(kind, F(d1), F(d2), F(str(lam)), F(str(mu)), F(str(a)), F(str(b)), F(str(c)), F(str(d)), op, op)


def symbiotic(lam=1, mu=1, op=None):
    return system(lv.SYMBIOTIC, lam, mu, 2, 1, 1, 2, op)


def competitive(lam=2, mu=2, op=None):
    return system(lv.COMPETITIVE, lam, mu, 3, 1, 1, 3, op)


# -- F+- ----------------------------------------------------------------------


def test_F_pm_closed_values():
    assert lv.F_pm(1.0) == (1.0, 1.0)
    assert lv.F_pm(0.0) == (0.0, 6.75)
    assert lv.z_pm(1.0) == (1.0, 1.0)
    assert lv.z_pm(0.0) == (0.0, 1.5)


def test_F_pm_against_brute_force():
    k = 0.8
    lo = np.linspace(1e-6, 1 - 1e-6, 400001)
    hi = np.linspace(1 + 1e-6, 50, 2000001)
    fm, fp = lv.F_pm(k)
    assert fm == pytest.approx(lv.F_of_z(lo, k).max(), abs=1e-8)
    assert fp == pytest.approx(lv.F_of_z(hi, k).min(), abs=1e-8)
    # the printed values 0.1825 and 2.8075 are rounded; the closed form gives 0.18236 and 2.80764
    assert fm == pytest.approx(0.1825, abs=5e-4) and fp == pytest.approx(2.8075, abs=5e-4)
    zm, zp = lv.z_pm(k)
    assert zm == pytest.approx(0.6299, abs=1e-4) and zp == pytest.approx(1.2702, abs=1e-4)


def test_k_outside_unit_interval():
    with pytest.raises(DomainError):
        lv.F_pm(1.2)
    with pytest.raises(DomainError):
        lv.z_pm(-0.1)


@settings(max_examples=60, deadline=None)
@given(k=st.floats(0, 0.999))
def test_extremizer_property(k):
    zm, zp = lv.z_pm(k)
    lo = np.linspace(1e-4, 1 - 1e-4, 2001)
    hi = np.linspace(1 + 1e-4, 50, 4001)
    Fm, Fp = lv.F_of_z(zm, k), lv.F_of_z(zp, k)
    assert np.all(Fm >= lv.F_of_z(lo, k) - 1e-12 * (1 + abs(Fm)))
    assert np.all(Fp <= lv.F_of_z(hi, k) + 1e-12 * (1 + abs(Fp)))


# -- stability window ---------------------------------------------------------


def test_constant_window_feasible():
    w = lv.stability_window(symbiotic())
    assert w.feasible and w.lower <= w.xi <= w.upper


def test_variable_kappa_with_constant_weight():
    g = make_grid(0, 1, 101)
    op = neumann(101)
    F = lambda e: sample(g, e)  # noqa: E731
    # a d^2/c^3 = 1 with kappa = b c / (a d) = b c varying in (0, 1]
    s = lv.LVSystem(lv.SYMBIOTIC, F("1"), F("1"), F("1"), F("1"), F("1"), F("0.2 + 0.8*x^2"), F("1"), F("1"), op, op)
    w = lv.stability_window(s)
    assert w.feasible and w.lower <= 1.0 <= w.upper


def test_piecewise_window_is_evaluated():
    g = make_grid(0, 1, 101)
    op = neumann(101)
    bc = Field(g, np.where(g.x < 0.5, 0.99, 0.1))
    one = Field(g, 1.0)
    s = lv.LVSystem(lv.SYMBIOTIC, one, one, one, one, one, bc, bc, one, op, op)
    w = lv.stability_window(s)
    weight = 1 / bc.values**3
    fm, fp = lv.F_pm(bc.values**2)
    assert w.lower == pytest.approx(np.max(weight * fm)) and w.upper == pytest.approx(np.min(weight * fp))
    assert w.feasible == (w.lower <= w.upper)


def test_window_needs_low_interaction():
    with pytest.raises(PreconditionError):
        lv.stability_window(system(lv.SYMBIOTIC, 1, 1, 1, 2, 2, 1))


# -- semitrivial states -------------------------------------------------------


def test_logistic_constant():
    op = neumann(51)
    g = op.grid
    th = lv.logistic_state(Field(g, 1.0), Field(g, 3.0), Field(g, 2.0), op)
    np.testing.assert_allclose(th.values, 1.5, rtol=1e-10)
    assert np.all(lv.logistic_state(Field(g, 1.0), Field(g, -1.0), Field(g, 1.0), op).values == 0)


def test_logistic_against_time_march():
    op = dirichlet_cosine(201)
    g = op.grid
    th = lv.logistic_state(Field(g, 1.0), Field(g, 2.0), Field(g, 1.0), op)
    # implicit diffusion, explicit reaction, dense and independent of the module
    L = active_operator(op).toarray()
    dt = 0.01
    step = np.linalg.inv(np.eye(L.shape[0]) + dt * L)
    u = np.full(L.shape[0], 0.5)
    for _ in range(5000):
        u_new = step @ (u + dt * (2 * u - u * u))
        if np.abs(u_new - u).max() < 1e-14:
            break
        u = u_new
    assert np.abs(th.values[1:-1] - u).max() < 1e-6


# -- coexistence --------------------------------------------------------------


def test_symbiotic_closed_form():
    st_ = lv.coexistence(symbiotic())
    np.testing.assert_allclose(st_.u.values, 1.0, atol=1e-8)
    np.testing.assert_allclose(st_.v.values, 1.0, atol=1e-8)
    assert st_.linearization_sigma > 0


def test_competitive_closed_form():
    st_ = lv.coexistence(competitive())
    np.testing.assert_allclose(st_.u.values, 0.5, atol=1e-8)
    np.testing.assert_allclose(st_.v.values, 0.5, atol=1e-8)
    assert st_.linearization_sigma > 0


def _dense_sigma(sys_, st_):
    J = lv.linearization_matrix(sys_, st_.u.values, st_.v.values).toarray()
    return float(np.min(sla.eigvals(J).real))


@pytest.mark.parametrize("make", [symbiotic, competitive])
def test_block_sigma_matches_dense(make):
    s = make(op=neumann(101))
    st_ = lv.coexistence(s)
    assert st_.linearization_sigma == pytest.approx(_dense_sigma(s, st_), abs=1e-8)


def test_dirichlet_symbiotic_against_time_march():
    op = dirichlet_cosine(101)
    s = symbiotic(3, 3, op)
    st_ = lv.coexistence(s)
    th1, th2 = lv.semitrivial_states(s)
    assert np.all(st_.u.values >= th1.values - 1e-12) and np.all(st_.v.values >= th2.values - 1e-12)
    L = active_operator(op).toarray()
    dt = 0.005
    step = np.linalg.inv(np.eye(L.shape[0]) + dt * L)
    u, v = th1.values[1:-1].copy(), th2.values[1:-1].copy()
    for _ in range(40000):
        un = step @ (u + dt * (3 - 2 * u + v) * u)
        vn = step @ (v + dt * (3 - 2 * v + u) * v)
        done = max(np.abs(un - u).max(), np.abs(vn - v).max()) < 1e-13
        u, v = un, vn
        if done:
            break
    assert np.abs(st_.u.values[1:-1] - u).max() < 1e-6
    assert np.abs(st_.v.values[1:-1] - v).max() < 1e-6
    assert st_.linearization_sigma > 0
    assert st_.linearization_sigma == pytest.approx(_dense_sigma(s, st_), abs=1e-8)


def test_competitive_states_below_semitrivials():
    op = dirichlet_cosine(101)
    s = competitive(6, 6, op)
    st_ = lv.coexistence(s)
    th1, th2 = lv.semitrivial_states(s)
    assert np.all(st_.u.values <= th1.values + 1e-12) and np.all(st_.v.values <= th2.values + 1e-12)


def test_non_solution_rejected():
    s = symbiotic()
    st_ = lv.coexistence(s)
    fake = lv.CoexistenceState(st_.u.with_values(1.5 * st_.u.values), st_.v.with_values(1.5 * st_.v.values), 0.0, 0.0)
    with pytest.raises(PreconditionError):
        lv.linearization_sigma(s, fake)
    assert lv.linearization_sigma(s, st_) == pytest.approx(st_.linearization_sigma)


def test_bound_box():
    assert lv.bound_box(system(lv.SYMBIOTIC, 1, 1, 1, 2, 2, 1)) is None
    U, V = lv.bound_box(symbiotic())
    assert U >= 1 and V >= 1


@pytest.mark.parametrize(
    "make, lam, mu, label",
    [
        (symbiotic, -1, -1, "E"),
        (symbiotic, 1, -0.6, "F"),
        (symbiotic, -0.6, 1, "D"),
        (competitive, 0.5, 2, "B"),
        (competitive, -1, 1, "C"),
        (competitive, -1, -1, "D"),
        (competitive, 1, -1, "E"),
        (competitive, 2, 0.5, "F"),
    ],
)
def test_no_coexistence_outside_regions(make, lam, mu, label):
    s = make(op=neumann(51))
    assert lv.classify_region(s, lam, mu).label == label
    with pytest.raises(ContinuationError):
        lv.coexistence(s, lam, mu)


def test_window_systems_are_stable_and_unique():
    matrix = [symbiotic(1, 1), symbiotic(3, 2, dirichlet_cosine(101)), competitive(2, 2), competitive(6, 5, dirichlet_cosine(101))]
    for s in matrix:
        assert lv.stability_window(s).feasible
        st_ = lv.coexistence(s)
        assert st_.linearization_sigma > 0
        # second seed: the time-march limit from a random positive start
        (u0, v0), = lv.random_initial_conditions(s.grid, 1, seed=7)
        tr = lv.evolve(s, u0, v0, dt=0.01, t_end=300, reference=(st_.u.values, st_.v.values), stride=10000)
        assert tr.dist[-1] < 1e-6
        # third seed: Newton polish from a perturbed state
        cp = lv._Coupled(s)
        z, _ = cp.newton(cp.pack(1.1 * st_.u.values, 0.9 * st_.v.values))
        u, v = cp.full(z)
        assert max(np.abs(u - st_.u.values).max(), np.abs(v - st_.v.values).max()) < 1e-6


# -- region classification ----------------------------------------------------


def test_symbiotic_region_E():
    r = lv.classify_region(symbiotic(op=neumann(51)), -1, -1)
    assert r.label == "E" and r.sig1 > 0 and r.sig2 > 0


def test_symbiotic_invasion_boundary():
    """At ``(theta1, 0)`` the v-invasion eigenvalue is ``-mu - lambda/2`` for these constants."""
    s = symbiotic(op=neumann(51))
    lam = 1.0
    r = lv.classify_region(s, lam, -0.3)
    assert r.sig2_cross == pytest.approx(0.3 - 0.5, abs=1e-8)
    assert lv.classify_region(s, lam, -0.5 + 1e-3).label == "A"
    assert lv.classify_region(s, lam, -0.5 - 1e-3).label == "F"
    assert lv.classify_region(s, lam, -0.5).label == "boundary_II"


def test_competitive_region_A():
    s = competitive(op=neumann(51))
    for lam, mu in [(2, 2), (1, 2.5), (2.5, 1)]:
        expect = "A" if (mu > lam / 3 and lam > mu / 3) else None
        assert lv.classify_region(s, lam, mu).label == expect
    assert lv.classify_region(s, 2, 0.5).label == "F"
    assert lv.classify_region(s, 0.5, 2).label == "B"


def _symbiotic_expected(lam, mu):
    s1, s2 = -lam, -mu
    if s1 < 0 and s2 < 0:
        return "B"
    if s1 < 0:
        return "A" if -mu - lam / 2 < 0 else "F"
    if s2 < 0:
        return "C" if -lam - mu / 2 < 0 else "D"
    return "E"


def test_small_scan_matches_closed_form():
    s = symbiotic(op=neumann(51))
    labels = lv.region_scan(s, [-1, 1.5], [-1, 1.5], 3)
    assert len(labels) == 9
    for r in labels:
        if abs(r.lam) > 1e-9 and abs(r.mu) > 1e-9:
            assert r.label == _symbiotic_expected(r.lam, r.mu)
    assert all(r.label == "E" for r in lv.region_scan(s, [-2, -0.5], [-2, -0.5], 3))
    (single,) = lv.region_scan(s, [0.7, 0.7], [1.1, 1.1], 1)
    assert single == lv.classify_region(s, 0.7, 1.1)


def test_region_csv_rows():
    s = symbiotic(op=neumann(51))
    text = lv.region_csv(lv.region_scan(s, [-1, 1], [-1, 1], 3))
    assert text.splitlines()[0] == "lambda,mu,label,sig1,sig2,sig1_cross,sig2_cross"
    assert len(text.splitlines()) == 10


# -- evolution ----------------------------------------------------------------


def test_stationary_at_coexistence():
    s = symbiotic()
    st_ = lv.coexistence(s)
    tr = lv.evolve(s, st_.u.values, st_.v.values, t_end=5, reference=(st_.u.values, st_.v.values))
    assert max(tr.dist) < 1e-9


def test_competitive_exclusion():
    s = competitive(2, 0.5)
    th1 = lv.logistic_state(s.d1, s.lam, s.a, s.op1)
    (u0, v0), = lv.random_initial_conditions(s.grid, 1, seed=3)
    tr = lv.evolve(s, u0, v0, dt=0.01, t_end=200, stride=1000)
    assert np.abs(tr.u.values - th1.values).max() < 1e-6
    assert tr.v.values.max() < 1e-6
    np.testing.assert_allclose(th1.values, 2 / 3, rtol=1e-10)


def test_strong_symbiosis_blows_up():
    s = system(lv.SYMBIOTIC, 1, 1, 1, 2, 2, 1)
    tr = lv.evolve(s, np.ones(101), np.ones(101), dt=0.01, t_end=50)
    assert tr.status == "blowup"


def test_random_initial_conditions_reproducible():
    g = make_grid(0, 1, 21)
    r1 = lv.random_initial_conditions(g, 3, seed=11)
    r2 = lv.random_initial_conditions(g, 3, seed=11)
    for (u1, v1), (u2, v2) in zip(r1, r2):
        assert np.array_equal(u1, u2) and np.array_equal(v1, v2)
        assert u1.min() > 0 and v1.min() > 0


def test_negative_initial_data_rejected():
    s = symbiotic(op=neumann(11))
    with pytest.raises(PreconditionError):
        lv.evolve(s, -np.ones(11), np.ones(11))
