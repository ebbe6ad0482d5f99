import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagsweep.errors import InputError
from lagsweep.polyfun import CompiledPolys, SparsePolynomial, eval_array

coeff = st.floats(-2.0, 2.0, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@st.composite
def polynomials(draw, max_vars=3, max_degree=4):
    n = draw(st.integers(1, max_vars))
    exps = st.lists(st.integers(0, max_degree), min_size=n, max_size=n).filter(lambda e: sum(e) <= max_degree)
    terms = draw(st.lists(st.tuples(exps, coeff), max_size=6))
    return SparsePolynomial.from_terms(n, terms)


@st.composite
def poly_and_point(draw):
    P = draw(polynomials())
    q = draw(st.lists(st.floats(-1, 1), min_size=P.nvars, max_size=P.nvars))
    return P, np.array(q)


def test_from_terms_merges_and_drops_zeros():
    P = SparsePolynomial.from_terms(2, [((1, 0), 2.0), ((1, 0), -2.0), ((0, 2), 1.5)])
    assert P.terms == (((0, 2), 1.5),)


def test_rejects_bad_terms():
    with pytest.raises(InputError):
        SparsePolynomial.from_terms(2, [((1,), 1.0)])
    with pytest.raises(InputError):
        SparsePolynomial.from_terms(1, [((-1,), 1.0)])
    with pytest.raises(InputError):
        SparsePolynomial.from_terms(1, [((1,), float("nan"))])


def test_json_round_trip_and_unknown_fields():
    P = SparsePolynomial.from_terms(2, [((2, 1), 1.0), ((1, 2), 1.0)])
    assert SparsePolynomial.from_json(P.to_json()) == P
    with pytest.raises(InputError):
        SparsePolynomial.from_json({"nvars": 2, "terms": [], "extra": 1})


def test_partial_index_out_of_range():
    with pytest.raises(InputError):
        SparsePolynomial.variable(2, 0).partial(2)


def test_eval_dimension_mismatch():
    with pytest.raises(InputError):
        SparsePolynomial.variable(2, 0).eval([1.0, 2.0, 3.0])


def test_hyperbola_derivatives_by_hand():
    F = SparsePolynomial.from_terms(2, [((2, 1), 1.0), ((1, 2), 1.0)])
    g1, g2 = F.gradient()
    assert g1 == SparsePolynomial.from_terms(2, [((1, 1), 2.0), ((0, 2), 1.0)])
    assert g2 == SparsePolynomial.from_terms(2, [((2, 0), 1.0), ((1, 1), 2.0)])
    T = F.third_tensor()
    vals = np.array([[[T[i][j][k].eval([0.3, -0.7]) for k in range(2)] for j in range(2)] for i in range(2)])
    assert vals[0, 0, 0] == 0 and vals[1, 1, 1] == 0
    assert vals[0, 0, 1] == 2 and vals[0, 1, 1] == 2


@settings(max_examples=60, deadline=None)
@given(poly_and_point(), st.data())
def test_partial_matches_central_difference(pq, data):
    P, q = pq
    i = data.draw(st.integers(0, P.nvars - 1))
    h = 1e-5
    e = np.zeros(P.nvars)
    e[i] = h
    fd = (P.eval(q + e) - P.eval(q - e)) / (2 * h)
    exact = P.partial(i).eval(q)
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


@settings(max_examples=60, deadline=None)
@given(polynomials())
def test_hessian_term_for_term(P):
    H = P.hessian()
    for i in range(P.nvars):
        for j in range(P.nvars):
            assert H[i][j] == P.partial(i).partial(j)


@settings(max_examples=60, deadline=None)
@given(poly_and_point())
def test_euler_identity_on_each_homogeneous_part(pq):
    P, q = pq
    for d, G in P.split_by_degree().items():
        lhs = sum(q[i] * G.partial(i).eval(q) for i in range(P.nvars))
        assert abs(lhs - d * G.eval(q)) <= 1e-12 * max(1.0, abs(d * G.eval(q)))


@settings(max_examples=40, deadline=None)
@given(poly_and_point(), poly_and_point())
def test_ring_operations_pointwise(pq1, pq2):
    P, q = pq1
    Q = SparsePolynomial.from_terms(P.nvars, pq2[0].terms) if pq2[0].nvars == P.nvars else P
    scale = max(1.0, abs(P.eval(q)) * max(1.0, abs(Q.eval(q))))
    assert abs((P + Q).eval(q) - P.eval(q) - Q.eval(q)) <= 1e-12 * scale
    assert abs((P - Q).eval(q) - P.eval(q) + Q.eval(q)) <= 1e-12 * scale
    assert abs((P * Q).eval(q) - P.eval(q) * Q.eval(q)) <= 1e-12 * scale


def test_batched_eval_and_compiled_agree(rng):
    P = SparsePolynomial.from_terms(3, [((3, 0, 0), 1.0), ((1, 1, 1), -0.5), ((0, 0, 4), 0.01)])
    q = rng.uniform(-1, 1, (7, 3))
    direct = np.array([P.eval(row) for row in q])
    np.testing.assert_allclose(P.eval(q), direct, rtol=0, atol=1e-14)
    H = P.hessian()
    np.testing.assert_allclose(CompiledPolys(H, 3)(q), np.moveaxis(eval_array(H, q), (0, 1), (-2, -1)), atol=1e-14)
