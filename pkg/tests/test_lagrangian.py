import numpy as np
import pytest

from lagsweep import lagrangian as lg
from lagsweep.errors import InputError
from lagsweep.planar import PlaneCurve
from lagsweep.polyfun import SparsePolynomial
from lagsweep.symplectic import fd_jacobian, omega
from lagsweep.verify import diagonal_cubic, hyperbola_germ, random_generic_germ, random_regular_frame

CUBE = lg.LagrangianGraph(SparsePolynomial.from_terms(1, [((3,), 1.0)]))
HYP = lg.LagrangianGraph(hyperbola_germ())
DIAG = lg.LagrangianGraph(diagonal_cubic(2))


def test_points_on_graph():
    assert CUBE.n == 1
    np.testing.assert_array_equal(lg.point_on_graph(CUBE, [1.0]).flat(), [1.0, 3.0])
    np.testing.assert_array_equal(lg.point_on_graph(DIAG, [1.0, 1.0]).flat(), [1, 1, 3, 3])
    np.testing.assert_array_equal(lg.point_on_graph(HYP, [0.0, 0.0]).flat(), [0, 0, 0, 0])


def test_tangent_points_by_hand():
    np.testing.assert_array_equal(lg.tangent_point(CUBE, lg.frame([1], [1])).flat(), [2, 9])
    np.testing.assert_array_equal(lg.tangent_point(DIAG, lg.frame([1, 1], [1, 0])).flat(), [2, 1, 9, 3])
    fr = lg.frame([0.3, -0.2], [0.0, 0.0])
    np.testing.assert_array_equal(lg.tangent_point(HYP, fr).flat(), lg.point_on_graph(HYP, fr.q).flat())


def test_matrix_A_by_hand():
    np.testing.assert_array_equal(lg.matrix_A(CUBE, lg.frame([0.4], [1.0])), [[6.0]])
    np.testing.assert_array_equal(lg.matrix_A(HYP, lg.frame([0.1, 0.7], [1, 0])), [[0, 2], [2, 2]])
    assert lg.det_A(HYP, lg.frame([0, 0], [1, 0])) == -4.0


def test_hyperbola_determinant_closed_form(rng):
    for _ in range(100):
        q, t = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        closed = -4.0 * (t[0] ** 2 + t[0] * t[1] + t[1] ** 2)
        assert abs(lg.det_A(HYP, lg.TangentFrame(q, t)) - closed) <= 1e-10
        assert closed < 0


def test_critical_set_membership():
    assert lg.in_critical_set(HYP, lg.frame([0.2, 0.3], [0, 0]))
    assert not lg.in_critical_set(HYP, lg.frame([0.2, 0.3], [1, 1]))
    assert lg.det_A(HYP, lg.frame([0.2, 0.3], [1, 1])) == -12.0
    assert not lg.in_critical_set(CUBE, lg.frame([0.5], [-0.3]))


def test_jacobian_sign_example():
    # phi(q, t) = (q + t, 3q^2 + 6qt) at (1, 1)
    jac = fd_jacobian(lambda v: lg.tangent_point(CUBE, lg.frame(v[:1], v[1:])).flat(), np.array([1.0, 1.0]))
    assert abs(np.linalg.det(jac) + 6.0) <= 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_jacobian_matches_det_A_random(n, rng):
    L = lg.LagrangianGraph(random_generic_germ(rng, n))
    for _ in range(10):
        fr = random_regular_frame(L, rng)
        jac = fd_jacobian(lambda v: lg.tangent_point(L, lg.frame(v[:n], v[n:])).flat(), np.concatenate([fr.q, fr.t]))
        dA = lg.det_A(L, fr)
        assert abs(abs(np.linalg.det(jac)) - abs(dA)) <= 1e-5 * abs(dA)


def test_det_sym_matches_numpy(rng):
    for n in range(1, 6):
        a = rng.normal(size=(n, n))
        a = a + a.T
        assert abs(lg.det_sym(a) - np.linalg.det(a)) <= 1e-12 * max(1.0, abs(np.linalg.det(a)))


def test_nondegeneracy_witness():
    assert lg.nondegeneracy_witness(CUBE, [1.0], 0.1) is not None
    assert lg.nondegeneracy_witness(DIAG, [0.0, 0.0], 0.1) is not None
    quad = lg.LagrangianGraph(SparsePolynomial.from_terms(2, [((2, 0), 1.0), ((1, 1), -0.5), ((0, 2), 2.0)]))
    assert lg.nondegeneracy_witness(quad, [0.3, 0.1], 0.1) is None
    p1, p2 = lg.nondegeneracy_witness(CUBE, [1.0], 0.1)
    base = lg.point_on_graph(CUBE, [1.0])
    assert abs(omega(p1 - base, p2 - base)) > 0


def test_quadratic_third_tensor_vanishes():
    quad = lg.LagrangianGraph(SparsePolynomial.from_terms(2, [((2, 0), 1.0), ((0, 2), 1.0)]))
    assert np.all(quad.third(np.zeros(2)) == 0)


def test_model_json_round_trip_and_rejection():
    L = lg.model_from_json(HYP.to_json())
    assert L.F == HYP.F
    P = lg.model_from_json({"type": "product", "curves": [{"kind": "ellipse", "a": 1.0, "b": 0.6}]})
    assert isinstance(P, lg.ProductCurveLagrangian) and P.n == 1
    with pytest.raises(InputError):
        lg.model_from_json({"type": "graph", "F": HYP.F.to_json(), "oops": 1})
    with pytest.raises(InputError):
        lg.model_from_json({"type": "torus"})


def test_product_tangent_basis_is_lagrangian(rng):
    L = lg.ProductCurveLagrangian((PlaneCurve.ellipse(1.0, 0.6), PlaneCurve.ellipse(1.3, 0.8)))
    B = L.tangent_basis(rng.uniform(0, 2 * np.pi, 2))
    assert abs(omega(B[:, 0], B[:, 1])) <= 1e-14


def test_product_rejects_nonconvex_factor():
    with pytest.raises(InputError):
        PlaneCurve.trig([0, 1, 0, 0.5], [0, 0], [0, 0], [0, 1])


def test_frame_shape_validation():
    with pytest.raises(InputError):
        lg.frame([0.0, 1.0], [1.0])
    with pytest.raises(InputError):
        lg.tangent_point(HYP, lg.frame([0.0], [1.0]))
