"""Battery of numerical invariants, one pass/fail line per property."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import billiard as bl
from . import lagrangian as lg
from . import planar as pl
from . import sweep as sw
from .polyfun import SparsePolynomial
from .symplectic import DarbouxPoint, fd_jacobian, is_symplectic, omega, omega_matrix


# -- random models shared with the tests ------------------------------------


def random_polynomial(rng: np.random.Generator, n: int, max_degree: int = 4, nterms: int = 6) -> SparsePolynomial:
    terms = []
    for _ in range(nterms):
        e = rng.integers(0, max_degree + 1, size=n)
        while e.sum() > max_degree:
            e[rng.choice(np.flatnonzero(e))] -= 1
        terms.append((e.tolist(), rng.uniform(-1.0, 1.0)))
    return SparsePolynomial.from_terms(n, terms)


def random_generic_germ(rng: np.random.Generator, n: int, quartic_noise: float = 1e-2) -> SparsePolynomial:
    """Cubic with nonzero q_i^3 terms plus small quartic terms."""
    terms = []
    for i in range(n):
        e = [0] * n
        e[i] = 3
        terms.append((e, rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)))
    for e in _exponents(n, 3):
        if max(e) < 3:
            terms.append((e, rng.uniform(-0.5, 0.5)))
    for e in _exponents(n, 4):
        terms.append((e, quartic_noise * rng.uniform(-1.0, 1.0)))
    return SparsePolynomial.from_terms(n, terms)


def _exponents(n: int, degree: int) -> list[list[int]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(e)
    return out


def diagonal_cubic(n: int) -> SparsePolynomial:
    """q_1^3 + ... + q_n^3."""
    return SparsePolynomial.from_terms(n, [([3 if j == i else 0 for j in range(n)], 1.0) for i in range(n)])


def hyperbola_germ() -> SparsePolynomial:
    """q_1^2 q_2 + q_1 q_2^2."""
    return SparsePolynomial.from_terms(2, [((2, 1), 1.0), ((1, 2), 1.0)])


def random_regular_frame(
    L: lg.LagrangianGraph,
    rng: np.random.Generator,
    min_abs_det: float = 1e-3,
    scale: float = 1.0,
    min_singular: float = 0.0,
) -> lg.TangentFrame:
    for _ in range(10_000):
        fr = lg.TangentFrame(rng.uniform(-scale, scale, L.n), rng.uniform(-scale, scale, L.n))
        if abs(lg.det_A(L, fr)) < min_abs_det or lg.in_critical_set(L, fr):
            continue
        if np.linalg.svd(lg.matrix_A(L, fr), compute_uv=False).min() >= min_singular:
            return fr
    raise RuntimeError("could not sample a regular frame")


def exterior_test_point(rng: np.random.Generator, n: int) -> tuple[DarbouxPoint, np.ndarray]:
    """Test point for diagonal_cubic(n) through which 2^n tangent spaces pass.

    Per factor 6 x q - 3 q^2 = y has roots x +- s when y = 3 (x^2 - s^2).
    """
    x = rng.uniform(-0.3, 0.3, n)
    s = rng.uniform(0.2, 0.6, n)
    return DarbouxPoint(x, 3.0 * (x**2 - s**2)), s


def hyperbola_test_point(rng: np.random.Generator) -> tuple[DarbouxPoint, np.ndarray]:
    """Off-L test point for hyperbola_germ with feet x +- t0.

    For a homogeneous cubic, grad F(x) - y = grad F(t) with t = x - q, and
    grad F(t) = grad F(-t), so t0 and -t0 are the two solutions.
    """
    L = lg.LagrangianGraph(hyperbola_germ())
    x = rng.uniform(-0.3, 0.3, 2)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    t0 = rng.uniform(0.2, 0.5) * np.array([np.cos(ang), np.sin(ang)])
    return DarbouxPoint(x, L.grad(x) - L.grad(t0)), t0


ELLIPSE_PAIR = ((1.0, 0.6), (1.3, 0.8))


def ellipse_pair() -> lg.ProductCurveLagrangian:
    return lg.ProductCurveLagrangian(tuple(pl.PlaneCurve.ellipse(a, b) for a, b in ELLIPSE_PAIR))


def wobbly_curve() -> pl.PlaneCurve:
    """A strictly convex trigonometric perturbation of the unit circle."""
    return pl.PlaneCurve.trig([0.0, 1.0, 0.08, 0.0], [0.0, 0.0, 0.0, 0.03], [0.0, 0.0, 0.0, 0.02], [0.0, 1.0, 0.05, 0.0])


# -- checks -----------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "tol": self.tol}


@dataclass
class Budget:
    """Sample sizes for the battery; ``full`` matches the acceptance sizes."""

    frames: int = 10
    germs: int = 10
    test_points: int = 5
    mc_samples: int = 400_000
    orbit_starts: int = 40
    pairs: int = 200


Check = Callable[[np.random.Generator, Budget, int], tuple[float, float, bool]]
CHECKS: list[tuple[str, Check]] = []


def check(name: str):
    def deco(fn: Check) -> Check:
        CHECKS.append((name, fn))
        return fn

    return deco


def _le(value: float, tol: float) -> tuple[float, float, bool]:
    return float(value), float(tol), bool(value <= tol)


@check("polyfun.partial_matches_finite_difference")
def _(rng, budget, threads):
    worst = 0.0
    h = 1e-5
    for _ in range(20):
        n = int(rng.integers(1, 4))
        P = random_polynomial(rng, n)
        q = rng.uniform(-1, 1, n)
        i = int(rng.integers(n))
        e = np.zeros(n)
        e[i] = h
        fd = (P.eval(q + e) - P.eval(q - e)) / (2 * h)
        exact = P.partial(i).eval(q)
        worst = max(worst, abs(fd - exact) / max(1.0, abs(exact)))
    return _le(worst, 1e-6)


@check("polyfun.euler_identity_on_cubic_part")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        G = random_generic_germ(rng, n).split_by_degree()[3]
        q = rng.uniform(-1, 1, n)
        lhs = sum(q[i] * G.partial(i).eval(q) for i in range(n))
        worst = max(worst, abs(lhs - 3.0 * G.eval(q)))
    return _le(worst, 1e-12)


@check("polyfun.hessian_equals_repeated_partial")
def _(rng, budget, threads):
    mismatches = 0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        P = random_polynomial(rng, n)
        H = P.hessian()
        for i in range(n):
            for j in range(i, n):
                mismatches += H[i][j] != P.partial(i).partial(j)
    return _le(mismatches, 0)


@check("symplectic.omega_bilinear_antisymmetric")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 5))
        a, b, c = (rng.normal(size=2 * n) for _ in range(3))
        al, be = rng.normal(size=2)
        worst = max(
            worst,
            abs(omega(al * a + be * b, c) - al * omega(a, c) - be * omega(b, c)),
            abs(omega(a, b) + omega(b, a)),
        )
    return _le(worst, 1e-12)


@check("symplectic.omega_matrix_squares_to_minus_identity")
def _(rng, budget, threads):
    worst = max(float(np.max(np.abs(omega_matrix(n) @ omega_matrix(n) + np.eye(2 * n)))) for n in range(1, 7))
    return _le(worst, 0.0)


@check("symplectic.fd_jacobian_of_quadratic_map")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 5))
        quad = rng.normal(size=(m, m, m))
        lin = rng.normal(size=(m, m))
        fn = lambda v: np.einsum("kij,i,j->k", quad, v, v) + lin @ v
        v = rng.uniform(-1, 1, m)
        exact = np.einsum("kij,j->ki", quad + quad.transpose(0, 2, 1), v) + lin
        worst = max(worst, float(np.max(np.abs(fd_jacobian(fn, v) - exact))))
    return _le(worst, 1e-8)


def _random_graph(rng: np.random.Generator) -> lg.LagrangianGraph:
    n = int(rng.integers(1, 4))
    return lg.LagrangianGraph(random_generic_germ(rng, n))


@check("lagrangian.matrix_A_exactly_symmetric")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(20):
        L = _random_graph(rng)
        A = lg.matrix_A(L, lg.TangentFrame(rng.uniform(-1, 1, L.n), rng.uniform(-1, 1, L.n)))
        worst = max(worst, float(np.max(np.abs(A - A.T))))
    return _le(worst, 0.0)


@check("lagrangian.jacobian_equals_det_A")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(budget.frames):
        L = _random_graph(rng)
        fr = random_regular_frame(L, rng)
        jac = fd_jacobian(sw._source_flat(L, L.n), np.concatenate([fr.q, fr.t]))
        dA = lg.det_A(L, fr)
        worst = max(worst, abs(abs(np.linalg.det(jac)) - abs(dA)) / abs(dA))
    return _le(worst, 1e-5)


@check("lagrangian.tangent_point_affine_in_t")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(20):
        L = _random_graph(rng)
        q, t, s = (rng.uniform(-1, 1, L.n) for _ in range(3))
        pts = [lg.tangent_point(L, lg.TangentFrame(q, t + j * s)).flat() for j in range(3)]
        worst = max(worst, float(np.max(np.abs(pts[0] - 2 * pts[1] + pts[2]))))
    return _le(worst, 1e-12)


@check("lagrangian.matrix_A_linear_in_t")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(20):
        L = _random_graph(rng)
        q, t, s = (rng.uniform(-1, 1, L.n) for _ in range(3))
        al, be = rng.normal(size=2)
        lhs = lg.matrix_A(L, lg.TangentFrame(q, al * t + be * s))
        rhs = al * lg.matrix_A(L, lg.TangentFrame(q, t)) + be * lg.matrix_A(L, lg.TangentFrame(q, s))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return _le(worst, 1e-12)


@check("lagrangian.hyperbola_det_closed_form")
def _(rng, budget, threads):
    L = lg.LagrangianGraph(hyperbola_germ())
    worst = 0.0
    for _ in range(100):
        q, t = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        closed = -4.0 * (t[0] ** 2 + t[0] * t[1] + t[1] ** 2)
        worst = max(worst, abs(lg.det_A(L, lg.TangentFrame(q, t)) - closed))
    return _le(worst, 1e-10)


@check("sweep.pullback_identity")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(budget.frames):
        L = _random_graph(rng)
        worst = max(worst, sw.verify_symplectomorphism(L, random_regular_frame(L, rng))["defect"])
    return _le(worst, 1e-6)


@check("sweep.pairing_of_pushed_forward_vectors")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(budget.frames):
        L = _random_graph(rng)
        j_src, j_tgt = sw.sweep_jacobians(L, random_regular_frame(L, rng))
        u, v = rng.normal(size=(2, 2 * L.n))
        worst = max(worst, abs(omega(j_src @ u, j_src @ v) - omega(j_tgt @ u, j_tgt @ v)))
    return _le(worst, 1e-6)


@check("sweep.roots_reproduce_test_point")
def _(rng, budget, threads):
    worst = 0.0
    tol = sw.NEWTON_TOL
    for _ in range(budget.test_points):
        for L, test in (
            (lg.LagrangianGraph(diagonal_cubic(2)), exterior_test_point(rng, 2)[0]),
            (lg.LagrangianGraph(hyperbola_germ()), hyperbola_test_point(rng)[0]),
        ):
            for q in sw.count_tangent_spaces(L, test, threads=threads).roots:
                p = lg.tangent_point(L, lg.TangentFrame(q, test.x - q))
                worst = max(worst, float(np.max(np.abs(p.flat() - test.flat()))))
    return _le(worst, 10 * tol)


@check("sweep.newton_number_closed_form")
def _(rng, budget, threads):
    bad = 0
    for n in range(1, 7):
        for d in itertools.combinations_with_replacement(range(1, 7), n):
            bad += sw.newton_number(d) != math.prod(v - 1 for v in d)
    return _le(bad, 0)


@check("sweep.multiplicity_at_most_2n")
def _(rng, budget, threads):
    excess = 0
    for g in range(budget.germs):
        n = 1 + g % 2
        L = lg.LagrangianGraph(random_generic_germ(rng, n))
        for _ in range(budget.test_points):
            test = DarbouxPoint(rng.uniform(-0.3, 0.3, n), rng.uniform(-0.3, 0.3, n))
            excess = max(excess, sw.count_tangent_spaces(L, test, threads=threads).count - 2**n)
    return _le(excess, 0)


@check("sweep.bound_attained_on_product_of_exteriors")
def _(rng, budget, threads):
    misses = 0
    for n in (1, 2):
        L = lg.LagrangianGraph(diagonal_cubic(n))
        for _ in range(budget.test_points):
            misses += sw.count_tangent_spaces(L, exterior_test_point(rng, n)[0], threads=threads).count != 2**n
    return _le(misses, 0)


@check("sweep.count_locally_constant")
def _(rng, budget, threads):
    changes = 0
    for _ in range(budget.test_points):
        for L, test in (
            (lg.LagrangianGraph(diagonal_cubic(2)), exterior_test_point(rng, 2)[0]),
            (lg.LagrangianGraph(hyperbola_germ()), hyperbola_test_point(rng)[0]),
        ):
            base = sw.count_tangent_spaces(L, test, threads=threads).count
            shifted = DarbouxPoint.from_flat(test.flat() + 1e-4 * rng.choice([-1.0, 1.0], size=4))
            changes += sw.count_tangent_spaces(L, shifted, threads=threads).count != base
    return _le(changes, 0)


@check("billiard.step_from_foot_invariants")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(budget.pairs):
        L = _random_graph(rng)
        pair = bl.step_from_foot(L, lg.TangentFrame(rng.uniform(-1, 1, L.n), rng.uniform(-1, 1, L.n)))
        mid = 0.5 * (pair.a + pair.b)
        d = pair.b - pair.a
        tangent = L.hess(pair.frame.q) @ d.x
        worst = max(worst, float(np.max(np.abs((mid - pair.foot).flat()))), float(np.max(np.abs(d.y - tangent))))
    return _le(worst, 1e-12)


@check("billiard.correspondence_symplectic_on_branch")
def _(rng, budget, threads):
    worst = 0.0
    for _ in range(budget.frames):
        L = _random_graph(rng)
        fr = random_regular_frame(L, rng, min_abs_det=1e-2, scale=0.5, min_singular=0.2)
        a = lg.tangent_point(L, fr).flat()
        worst = max(worst, bl.correspondence_jacobian_defect(L, a, fr.q))
        worst = max(worst, is_symplectic(bl.correspondence_jacobian(L, a, fr.q))[1])
    return _le(worst, 1e-5)


@check("billiard.linear_iso_round_trip_and_form")
def _(rng, budget, threads):
    worst = 0.0
    for n in range(1, 5):
        M = bl.linear_iso_matrix(n)
        worst = max(worst, float(np.max(np.abs(M.T @ bl.cotangent_form(n) @ M - 0.5 * bl.difference_form(n)))))
        a, abar = DarbouxPoint(*rng.normal(size=(2, n))), DarbouxPoint(*rng.normal(size=(2, n)))
        a2, abar2 = bl.linear_iso_inverse(*bl.linear_iso(a, abar))
        worst = max(worst, float(np.max(np.abs((a2 - a).flat()))), float(np.max(np.abs((abar2 - abar).flat()))))
    return _le(worst, 1e-12)


@check("billiard.conormal_graph")
def _(rng, budget, threads):
    failures = 0
    for _ in range(budget.pairs):
        L = _random_graph(rng)
        pair = bl.step_from_foot(L, lg.TangentFrame(rng.uniform(-1, 1, L.n), rng.uniform(-1, 1, L.n)))
        failures += not bl.conormal_check(L, pair.a, pair.b, 1e-9)["ok"]
        kick = DarbouxPoint.from_flat(pair.b.flat() + 1e-3 * rng.normal(size=2 * L.n))
        failures += bl.conormal_check(L, pair.a, kick, 1e-9)["ok"]
    return _le(failures, 0)


@check("billiard.action_dihedral_symmetry")
def _(rng, budget, threads):
    worst = 0.0
    for k in (3, 5, 7, 9):
        n = int(rng.integers(1, 4))
        qs = [DarbouxPoint(*rng.normal(size=(2, n))) for _ in range(k)]
        base = bl.action(qs)
        worst = max(worst, abs(bl.action(qs[1:] + qs[:1]) - base), abs(bl.action(qs[::-1]) + base))
    return _le(worst, 1e-12)


@check("billiard.action_gradient_matches_fd")
def _(rng, budget, threads):
    worst = 0.0
    L = ellipse_pair()
    for k in (3, 5):
        f = bl.ProductAction(L, k)
        for _ in range(5):
            th = rng.uniform(0, 2 * np.pi, k * L.n)
            fd = fd_jacobian(lambda v: np.array([f.value(v)]), th)[0]
            worst = max(worst, float(np.max(np.abs(fd - f.gradient(th)))))
    return _le(worst, 1e-6)


def _orbits(budget: Budget, threads: int, k: int):
    L = ellipse_pair()
    return L, bl.find_periodic_orbits(L, k, starts=budget.orbit_starts, seed=0, threads=threads)


@check("billiard.periodic_orbits_exist_and_verify")
def _(rng, budget, threads):
    worst = math.inf
    for k in (3, 5):
        L, orbits = _orbits(budget, threads, k)
        best = min((bl.orbit_verify(L, o)["max_defect"] for o in orbits if o.is_max), default=math.inf)
        worst = best if worst == math.inf else max(worst, best)
    return _le(worst, 1e-6)


@check("billiard.reconstruction_identity")
def _(rng, budget, threads):
    L, orbits = _orbits(budget, threads, 3)
    worst = 0.0
    for o in orbits:
        z, q = np.array(o.points), L.points(np.array(o.midpoints))
        worst = max(worst, float(np.max(np.abs(z + np.roll(z, -1, axis=0) - 2 * q))))
    return _le(worst, 1e-12)


@check("planar.forward_backward_identity")
def _(rng, budget, threads):
    worst = 0.0
    for curve in (pl.PlaneCurve.ellipse(2.0, 1.0), wobbly_curve()):
        for _ in range(20):
            ang = rng.uniform(0, 2 * np.pi)
            a = curve.point(ang) + rng.uniform(0.2, 2.0) * np.array([np.cos(ang), np.sin(ang)])
            b, _ = pl.planar_outer_step(curve, a, "forward")
            back, _ = pl.planar_outer_step(curve, b, "backward")
            worst = max(worst, float(np.max(np.abs(back - a))))
    return _le(worst, 1e-8)


@check("planar.step_preserves_area")
def _(rng, budget, threads):
    worst = 0.0
    for curve in (pl.PlaneCurve.ellipse(2.0, 1.0), wobbly_curve()):
        for _ in range(10):
            ang = rng.uniform(0, 2 * np.pi)
            a = curve.point(ang) + rng.uniform(0.3, 2.0) * np.array([np.cos(ang), np.sin(ang)])
            jac = fd_jacobian(lambda v: pl.planar_outer_step(curve, v)[0], a)
            worst = max(worst, abs(np.linalg.det(jac) - 1.0), is_symplectic(jac)[1])
    return _le(worst, 1e-5)


@check("planar.product_orbits_project_to_planar_orbits")
def _(rng, budget, threads):
    L, orbits = _orbits(budget, threads, 3)
    reports = [bl.orbit_verify(L, o) for o in orbits]
    if not any(r["collapsed_factors"] == [] for r in reports):
        return math.inf, 1e-6, False
    return _le(max(r["planar_defect"] for r in reports), 1e-6)


@check("planar.tractrix_area_is_half_pi")
def _(rng, budget, threads):
    return _le(abs(pl.tractrix_area(1e-3) - np.pi / 2), 1e-4)


@check("planar.tangent_sweep_and_cluster_areas_agree")
def _(rng, budget, threads):
    sweep_area, cluster_area = pl.mamikon_area_check(
        pl.PlaneCurve.circle(), pl.SweepRegion(), budget.mc_samples, int(rng.integers(2**31))
    )
    return _le(abs(sweep_area - cluster_area) / cluster_area, 1e-2)


def run_suite(seed: int = 0, threads: int = 1, budget: Budget | None = None) -> list[CheckResult]:
    budget = budget or Budget()
    streams = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = []
    for (name, fn), ss in zip(CHECKS, streams):
        value, tol, passed = fn(np.random.default_rng(ss), budget, threads)
        results.append(CheckResult(name, passed, value, tol))
    return results
