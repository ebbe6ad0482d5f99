import numpy as np
import pytest

from lagsweep import billiard as bl
from lagsweep import lagrangian as lg
from lagsweep.errors import PreconditionError
from lagsweep.planar import PlaneCurve
from lagsweep.polyfun import SparsePolynomial
from lagsweep.symplectic import DarbouxPoint, fd_jacobian, is_symplectic
from lagsweep.verify import ellipse_pair, hyperbola_germ, hyperbola_test_point, random_generic_germ, random_regular_frame

CUBE = lg.LagrangianGraph(SparsePolynomial.from_terms(1, [((3,), 1.0)]))
HYP = lg.LagrangianGraph(hyperbola_germ())


def test_step_from_foot_examples():
    p = bl.step_from_foot(CUBE, lg.frame([1], [1]))
    np.testing.assert_array_equal(p.a.flat(), [2, 9])
    np.testing.assert_array_equal(p.b.flat(), [0, -3])
    np.testing.assert_array_equal((0.5 * (p.a + p.b)).flat(), [1, 3])
    fixed = bl.step_from_foot(CUBE, lg.frame([0.4], [0]))
    assert fixed.a == fixed.b == fixed.foot


def test_correspondents_of_cube():
    pairs = bl.correspondents(CUBE, DarbouxPoint([0.0], [-3.0]), box=([-3.0], [3.0]))
    partners = sorted(tuple(np.round(p.b.flat(), 10)) for p in pairs)
    assert partners == [(-2.0, 9.0), (2.0, 9.0)]


def test_on_graph_point_is_its_own_partner():
    a = lg.point_on_graph(HYP, [0.2, -0.1])
    pairs = bl.correspondents(HYP, a)
    assert any(np.allclose(p.b.flat(), a.flat(), atol=1e-8) and p.near_critical for p in pairs)


def test_hyperbola_has_two_partners(rng):
    for _ in range(3):
        a, _ = hyperbola_test_point(rng)
        pairs = [p for p in bl.correspondents(HYP, a) if not p.near_critical]
        assert len(pairs) == 2
        for p in pairs:
            assert bl.conormal_check(HYP, p.a, p.b)["ok"]


def test_linear_iso_examples(rng):
    q1, q2, p1, p2 = bl.linear_iso(DarbouxPoint([2.0], [9.0]), DarbouxPoint([0.0], [-3.0]))
    assert (q1.tolist(), q2.tolist(), p1.tolist(), p2.tolist()) == ([1.0], [3.0], [-6.0], [1.0])
    a = DarbouxPoint(*rng.normal(size=(2, 3)))
    q1, q2, p1, p2 = bl.linear_iso(a, a)
    assert np.all(p1 == 0) and np.all(p2 == 0)
    np.testing.assert_array_equal(q1, a.x)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_linear_iso_form_identity(n):
    M = bl.linear_iso_matrix(n)
    assert np.max(np.abs(M.T @ bl.cotangent_form(n) @ M - 0.5 * bl.difference_form(n))) <= 1e-12


def test_conormal_examples():
    p = bl.step_from_foot(CUBE, lg.frame([1], [1]))
    assert bl.conormal_check(CUBE, p.a, p.b)["ok"]
    off = DarbouxPoint([0.0], [1.0])
    assert not bl.conormal_check(CUBE, off, off)["ok"]
    kicked = bl.conormal_check(CUBE, p.a, p.b + DarbouxPoint([0.0], [0.1]))
    assert not kicked["ok"]
    assert abs(kicked["tangency_defect"] - 0.05) <= 0.01


def test_correspondence_jacobian_is_symplectic(rng):
    for n in (1, 2, 3):
        L = lg.LagrangianGraph(random_generic_germ(rng, n))
        fr = random_regular_frame(L, rng, min_abs_det=1e-2, scale=0.5, min_singular=0.2)
        a = lg.tangent_point(L, fr).flat()
        J = bl.correspondence_jacobian(L, a, fr.q)
        assert is_symplectic(J)[1] <= 1e-10
        J_fd = fd_jacobian(lambda v: bl.partner(L, v, fr.q), a, 1e-7)
        assert np.max(np.abs(J - J_fd)) <= 1e-4 * max(1.0, np.max(np.abs(J)))


def test_action_examples():
    qs = [DarbouxPoint([0.0], [0.0]), DarbouxPoint([1.0], [0.0]), DarbouxPoint([0.0], [1.0])]
    assert bl.action(qs) == -1.0
    same = [DarbouxPoint([0.3, 1.0], [2.0, -1.0])] * 5
    assert bl.action(same) == 0.0


@pytest.mark.parametrize("k", [3, 5, 7, 9])
def test_action_dihedral(k, rng):
    qs = [DarbouxPoint(*rng.normal(size=(2, 2))) for _ in range(k)]
    base = bl.action(qs)
    assert abs(bl.action(qs[2:] + qs[:2]) - base) <= 1e-12
    assert abs(bl.action(qs[::-1]) + base) <= 1e-12


def test_product_action_derivatives(rng):
    L = ellipse_pair()
    f = bl.ProductAction(L, 5)
    th = rng.uniform(0, 2 * np.pi, 10)
    g = fd_jacobian(lambda v: np.array([f.value(v)]), th)[0]
    assert np.max(np.abs(g - f.gradient(th))) <= 1e-6
    H = fd_jacobian(f.gradient, th)
    assert np.max(np.abs(H - f.hessian(th))) <= 1e-6


def test_even_period_is_refused():
    with pytest.raises(PreconditionError):
        bl.find_periodic_orbits(ellipse_pair(), 4)


def test_single_circle_three_orbits():
    L = lg.ProductCurveLagrangian((PlaneCurve.circle(),))
    orbits = bl.find_periodic_orbits(L, 3, starts=16, seed=1)
    good = [o for o in orbits if bl.orbit_verify(L, o)["ok"]]
    assert good
    z = np.array(good[0].points)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 2.0, atol=1e-8)


def test_orbit_verify_flags_perturbation_and_backtracking():
    L = ellipse_pair()
    orbits = bl.find_periodic_orbits(L, 3, starts=20, seed=0)
    o = next(o for o in orbits if bl.orbit_verify(L, o)["ok"])
    np.testing.assert_allclose(
        np.array(o.points) + np.roll(np.array(o.points), -1, axis=0), 2 * L.points(np.array(o.midpoints)), atol=1e-12
    )
    kicked = bl.OrbitCandidate(3, o.midpoints, [o.points[0] + np.array([1e-3, 0, 0, 0])] + o.points[1:], o.action, 0, o.margin)
    r = bl.orbit_verify(L, kicked)
    assert not r["ok"] and 5e-4 <= r["max_defect"] <= 5e-3

    th = np.array([0.3, 1.1])
    q = L.points(th)
    z = np.array([q, q, q])
    back = bl.OrbitCandidate(3, [th, th, th], list(z), 0.0, 0.0, 0.0)
    r = bl.orbit_verify(L, back)
    assert r["backtracking"] and not r["ok"]


def test_search_is_thread_independent():
    L = ellipse_pair()
    a = [o.to_json() for o in bl.find_periodic_orbits(L, 3, starts=12, seed=3, threads=1)]
    b = [o.to_json() for o in bl.find_periodic_orbits(L, 3, starts=12, seed=3, threads=4)]
    assert a == b
