"""Lagrangian submanifolds: graphs of gradients and products of plane curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InputError
from .planar import PlaneCurve
from .polyfun import CompiledPolys, SparsePolynomial
from .symplectic import DarbouxPoint, omega

WITNESS_BUDGET = 1000


@dataclass(frozen=True)
class TangentFrame:
    """Foot point parameter ``q`` on L and coordinates ``t`` in its tangent space."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if q.shape != t.shape or q.ndim != 1:
            raise InputError(f"q and t must be equal-length vectors, got {q.shape} and {t.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise InputError("frame entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True, eq=False)
class LagrangianGraph:
    """L = {(q, grad F(q))} for a polynomial generating function F."""

    F: SparsePolynomial

    @property
    def n(self) -> int:
        return self.F.nvars

    @cached_property
    def grad_polys(self) -> list[SparsePolynomial]:
        return self.F.gradient()

    @cached_property
    def hess_polys(self) -> list[list[SparsePolynomial]]:
        return self.F.hessian()

    @cached_property
    def third_polys(self) -> list[list[list[SparsePolynomial]]]:
        return self.F.third_tensor()

    @cached_property
    def _compiled(self) -> tuple[CompiledPolys, CompiledPolys, CompiledPolys, CompiledPolys]:
        n = self.n
        return (
            CompiledPolys(self.grad_polys, n),
            CompiledPolys(self.hess_polys, n),
            CompiledPolys(self.third_polys, n),
            CompiledPolys(self.grad_polys + [h for row in self.hess_polys for h in row], n),
        )

    def _check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.n,):
            raise InputError(f"expected vectors of length {self.n}, got shape {q.shape}")
        return q

    # Batched evaluations: q has shape (..., n).
    def grad(self, q) -> np.ndarray:
        q = self._check(q)
        return self._compiled[0](q)

    def hess(self, q) -> np.ndarray:
        q = self._check(q)
        return self._compiled[1](q)

    def third(self, q) -> np.ndarray:
        q = self._check(q)
        return self._compiled[2](q)

    def grad_hess(self, q) -> tuple[np.ndarray, np.ndarray]:
        """Gradient and Hessian from one pass over the monomials."""
        q = self._check(q)
        n = self.n
        both = self._compiled[3](q)
        return both[..., :n], both[..., n:].reshape(q.shape[:-1] + (n, n))

    def has_cubic_diagonal(self) -> bool:
        """True when every q_i^3 appears in F with nonzero coefficient."""
        n = self.n
        return all(self.F.coefficient([3 if j == i else 0 for j in range(n)]) != 0.0 for i in range(n))

    def to_json(self) -> dict:
        return {"type": "graph", "F": self.F.to_json()}


def point_on_graph(L: LagrangianGraph, q) -> DarbouxPoint:
    q = L._check(q)
    if q.ndim != 1:
        raise InputError("point_on_graph expects a single point")
    return DarbouxPoint(q, L.grad(q))


def tangent_point(L: LagrangianGraph, frame: TangentFrame) -> DarbouxPoint:
    """The point with coordinates ``t`` in the affine tangent space at q."""
    q, t = L._check(frame.q), L._check(frame.t)
    return DarbouxPoint(q + t, L.grad(q) + L.hess(q) @ t)


def matrix_A(L: LagrangianGraph, frame: TangentFrame) -> np.ndarray:
    """a_ij = sum_k t_k F_{ijk}(q)."""
    return L.third(L._check(frame.q)) @ L._check(frame.t)


def det_sym(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
    return float(np.linalg.det(a))


def det_A(L: LagrangianGraph, frame: TangentFrame) -> float:
    return det_sym(matrix_A(L, frame))


def critical_scale(L: LagrangianGraph, frame: TangentFrame) -> float:
    third = L.third(frame.q)
    return max(1.0, float(np.linalg.norm(frame.t)) ** L.n * float(np.max(np.abs(third), initial=0.0)))


def in_critical_set(L: LagrangianGraph, frame: TangentFrame, tol: float = 1e-9) -> bool:
    """Whether the tangent-space coordinates lie on the critical cone det A = 0.

    det A is homogeneous of degree n in t, so the test is relative to the local
    scale ||t||^n max|F_ijk|.
    """
    return abs(det_A(L, frame)) <= tol * critical_scale(L, frame)


def nondegeneracy_witness(
    L: LagrangianGraph,
    q,
    radius: float,
    seed: int = 0,
    budget: int = WITNESS_BUDGET,
) -> tuple[DarbouxPoint, DarbouxPoint] | None:
    """Nearby points q1, q2 on L with omega(q1 - q, q2 - q) != 0, or None.

    None means no witness was found among ``budget`` random pairs, which
    suggests L is a piece of an affine Lagrangian subspace near q.
    """
    if radius <= 0:
        raise InputError("radius must be positive")
    q = L._check(q)
    base = point_on_graph(L, q)
    rng = np.random.default_rng(seed)
    threshold = 1e-10 * radius**2
    for _ in range(budget):
        u, v = _ball(rng, L.n, radius), _ball(rng, L.n, radius)
        p1, p2 = point_on_graph(L, q + u), point_on_graph(L, q + v)
        if abs(omega(p1 - base, p2 - base)) > threshold:
            return p1, p2
    return None


def _ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    d = rng.normal(size=n)
    return radius * rng.uniform() ** (1.0 / n) * d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class ProductCurveLagrangian:
    """L = gamma_1 x ... x gamma_n, with gamma_i in the (x_i, y_i) plane.

    Points are parametrized by one curve parameter per factor.
    """

    curves: tuple[PlaneCurve, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        curves = tuple(self.curves)
        if not curves:
            raise InputError("need at least one curve")
        for c in curves:
            if not c.is_strictly_convex():
                raise InputError("product factors must be strictly convex")
        object.__setattr__(self, "curves", curves)

    @property
    def n(self) -> int:
        return len(self.curves)

    def points(self, theta) -> np.ndarray:
        """Flat Darboux coordinates for angle tuples of shape (..., n)."""
        theta = np.asarray(theta, dtype=float)
        xy = np.stack([c.point(theta[..., j]) for j, c in enumerate(self.curves)], axis=-2)
        return np.concatenate([xy[..., 0], xy[..., 1]], axis=-1)

    def point(self, theta) -> DarbouxPoint:
        return DarbouxPoint.from_flat(self.points(theta))

    def factor_derivatives(self, theta, order: int) -> np.ndarray:
        """d^order gamma_j / dt^order at theta_j, shape (..., n, 2)."""
        theta = np.asarray(theta, dtype=float)
        return np.stack([c.derivative(theta[..., j], order) for j, c in enumerate(self.curves)], axis=-2)

    def tangent_basis(self, theta) -> np.ndarray:
        """Columns span T L at theta; shape (2n, n)."""
        d = self.factor_derivatives(theta, 1)
        n = self.n
        basis = np.zeros((2 * n, n))
        basis[np.arange(n), np.arange(n)] = d[:, 0]
        basis[n + np.arange(n), np.arange(n)] = d[:, 1]
        return basis

    def nearest_parameters(self, z) -> np.ndarray:
        z = DarbouxPoint.from_flat(z) if not isinstance(z, DarbouxPoint) else z
        return np.array([c.nearest_parameter([z.x[j], z.y[j]]) for j, c in enumerate(self.curves)])

    def to_json(self) -> dict:
        return {"type": "product", "curves": [c.to_json() for c in self.curves]}


LagrangianModel = LagrangianGraph | ProductCurveLagrangian


def model_from_json(obj: dict) -> LagrangianModel:
    kind = obj.get("type")
    if kind == "graph":
        if set(obj) - {"type", "F"}:
            raise InputError(f"unknown graph model fields {sorted(set(obj) - {'type', 'F'})}")
        return LagrangianGraph(SparsePolynomial.from_json(obj["F"]))
    if kind == "product":
        if set(obj) - {"type", "curves"}:
            raise InputError(f"unknown product model fields {sorted(set(obj) - {'type', 'curves'})}")
        return ProductCurveLagrangian(tuple(PlaneCurve.from_json(c) for c in obj["curves"]))
    raise InputError(f"unknown model type {kind!r}")


def frame(q: Sequence[float], t: Sequence[float]) -> TangentFrame:
    return TangentFrame(np.asarray(q, dtype=float), np.asarray(t, dtype=float))
