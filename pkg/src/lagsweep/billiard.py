"""Outer billiard correspondence relative to a Lagrangian submanifold.

Two points correspond when they lie on one affine tangent space of L and are
symmetric about its foot point. Odd periodic orbits are found as critical
points of the alternating action on L^k.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, PreconditionError
from .lagrangian import (
    LagrangianGraph,
    LagrangianModel,
    ProductCurveLagrangian,
    TangentFrame,
    in_critical_set,
    matrix_A,
    point_on_graph,
    tangent_point,
)
from .planar import cross, dihedral_canonical, dihedral_distance, orbit_from_midpoints, planar_step_defect, wrap_angle
from .symplectic import DarbouxPoint, fd_jacobian, is_symplectic, omega, omega_matrix
from .sweep import _newton_batch, count_tangent_spaces

BACKTRACK_MARGIN = 1e-6
GRAD_TOL = 1e-9
DEDUPE_TOL = 1e-5
COLLAPSE_TOL = 1e-6
DEFAULT_STARTS = 200


@dataclass(frozen=True)
class CorrespondencePair:
    a: DarbouxPoint
    b: DarbouxPoint
    foot: DarbouxPoint
    frame: TangentFrame
    near_critical: bool = False

    def to_json(self) -> dict:
        return {
            "a": self.a.to_json(),
            "b": self.b.to_json(),
            "foot": self.foot.to_json(),
            "q": self.frame.q.tolist(),
            "t": self.frame.t.tolist(),
            "near_critical": self.near_critical,
        }


def step_from_foot(L: LagrangianGraph, frame: TangentFrame) -> CorrespondencePair:
    foot = point_on_graph(L, frame.q)
    a = tangent_point(L, frame)
    b = 2.0 * foot - a
    return CorrespondencePair(a, b, foot, frame)


def correspondents(
    L: LagrangianGraph,
    a: DarbouxPoint,
    box=None,
    grid: int = 12,
    tol: float = 1e-10,
    threads: int = 1,
) -> list[CorrespondencePair]:
    """All partners of ``a``: one per foot whose tangent space passes through it."""
    report = count_tangent_spaces(L, a, box=box, grid=grid, tol=tol, threads=threads)
    flagged = set(report.flagged_near_critical)
    pairs = []
    for i, q in enumerate(report.roots):
        foot = point_on_graph(L, q)
        pairs.append(CorrespondencePair(a, 2.0 * foot - a, foot, TangentFrame(q, a.x - q), i in flagged))
    return pairs


def partner(L: LagrangianGraph, a, q_guess) -> np.ndarray:
    """Partner of ``a`` (flat) on the branch whose foot is nearest ``q_guess``."""
    a = np.asarray(a, dtype=float)
    n = L.n
    q, res = _newton_batch(L, np.atleast_2d(np.asarray(q_guess, dtype=float)), a[:n], a[n:], 60)
    if res[0] > 1e-9:
        raise PreconditionError("lost the branch while tracking the foot point")
    return 2.0 * point_on_graph(L, q[0]).flat() - a


# -- linear isomorphism and conormal graph ----------------------------------


def linear_iso(a: DarbouxPoint, abar: DarbouxPoint):
    """(q1, q2, p1, p2) = ((x + x')/2, (y + y')/2, (y' - y)/2, (x - x')/2)."""
    if a.n != abar.n:
        raise InputError("dimension mismatch")
    return (a.x + abar.x) / 2, (a.y + abar.y) / 2, (abar.y - a.y) / 2, (a.x - abar.x) / 2


def linear_iso_inverse(q1, q2, p1, p2) -> tuple[DarbouxPoint, DarbouxPoint]:
    q1, q2, p1, p2 = (np.asarray(v, dtype=float) for v in (q1, q2, p1, p2))
    return DarbouxPoint(q1 + p2, q2 - p1), DarbouxPoint(q1 - p2, q2 + p1)


def linear_iso_matrix(n: int) -> np.ndarray:
    """Matrix of linear_iso from (x, y, x', y') to (q1, q2, p1, p2)."""
    eye, zero = 0.5 * np.eye(n), np.zeros((n, n))
    return np.block(
        [
            [eye, zero, eye, zero],
            [zero, eye, zero, eye],
            [zero, -eye, zero, eye],
            [eye, zero, -eye, zero],
        ]
    )


def cotangent_form(n: int) -> np.ndarray:
    """dq ^ dp on T*R^{2n} in (q1, q2, p1, p2) coordinates."""
    return omega_matrix(2 * n)


def difference_form(n: int) -> np.ndarray:
    """omega (-) omega = dx' ^ dy' - dx ^ dy in (x, y, x', y') coordinates."""
    w = omega_matrix(n)
    zero = np.zeros_like(w)
    return np.block([[-w, zero], [zero, w]])


def conormal_check(L: LagrangianModel, a: DarbouxPoint, abar: DarbouxPoint, tol: float = 1e-9) -> dict:
    """Whether (a, abar) is on the conormal bundle of L under linear_iso.

    The midpoint (q1, q2) must lie on L and (-p2, p1) = (abar - a)/2 must be
    tangent to L there.
    """
    q1, q2, p1, p2 = linear_iso(a, abar)
    wx, wy = -p2, p1
    if isinstance(L, LagrangianGraph):
        mid_defect = float(np.max(np.abs(q2 - L.grad(q1))))
        tan_defect = float(np.max(np.abs(wy - L.hess(q1) @ wx)))
    else:
        theta = L.nearest_parameters(np.concatenate([q1, q2]))
        mid_defect = float(np.max(np.abs(L.points(theta) - np.concatenate([q1, q2]))))
        tangents = L.factor_derivatives(theta, 1)
        unit = tangents / np.linalg.norm(tangents, axis=-1, keepdims=True)
        tan_defect = float(np.max(np.abs(cross(unit, np.stack([wx, wy], axis=-1)))))
    return {
        "ok": mid_defect <= tol and tan_defect <= tol,
        "midpoint_defect": mid_defect,
        "tangency_defect": tan_defect,
    }


# -- action on L^k ----------------------------------------------------------


def sign_matrix(k: int) -> np.ndarray:
    """C with C_ij = (-1)^(i+j) sign(j - i), so action = 1/2 sum C_ij omega(q_i, q_j)."""
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    return np.where(i == j, 0.0, (-1.0) ** (i + j) * np.sign(j - i))


def action(qs) -> float:
    """sum_{i<j} (-1)^(i+j) omega(q_i, q_j)."""
    qs = list(qs)
    if len(qs) < 3:
        raise InputError("the action needs k >= 3 points")
    total = 0.0
    for i in range(len(qs)):
        for j in range(i + 1, len(qs)):
            total += (-1.0) ** (i + j) * omega(qs[i], qs[j])
    return total


class ProductAction:
    """Action on L^k for a product of curves, as a function of the k x n angles."""

    def __init__(self, L: ProductCurveLagrangian, k: int):
        self.L = L
        self.k = k
        self.c = sign_matrix(k)

    def _parts(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(self.k, self.L.n)
        q = self.L.points(theta)
        v = self.c @ q
        return theta, q, v

    def value(self, theta) -> float:
        _, q, v = self._parts(theta)
        n = self.L.n
        return 0.5 * float(np.sum(q[:, :n] * v[:, n:] - q[:, n:] * v[:, :n]))

    def gradient(self, theta) -> np.ndarray:
        theta, _, v = self._parts(theta)
        n = self.L.n
        d1 = self.L.factor_derivatives(theta, 1)
        vj = np.stack([v[:, :n], v[:, n:]], axis=-1)
        return cross(d1, vj).ravel()

    def hessian(self, theta) -> np.ndarray:
        theta, _, v = self._parts(theta)
        k, n = self.k, self.L.n
        d1 = self.L.factor_derivatives(theta, 1)
        d2 = self.L.factor_derivatives(theta, 2)
        vj = np.stack([v[:, :n], v[:, n:]], axis=-1)
        h = np.zeros((k, n, k, n))
        for j in range(n):
            h[:, j, :, j] = self.c * cross(d1[:, None, j, :], d1[None, :, j, :])
            h[np.arange(k), j, np.arange(k), j] = cross(d2[:, j, :], vj[:, j, :])
        return h.reshape(k * n, k * n)


# -- periodic orbits --------------------------------------------------------


@dataclass
class OrbitCandidate:
    k: int
    midpoints: list[np.ndarray]  # angle tuples (product) or q vectors (graph)
    points: list[np.ndarray]  # flat Darboux z_i
    action: float
    residual: float
    margin: float
    is_max: bool = False
    grad_norm: float = 0.0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "action": self.action,
            "residual": self.residual,
            "is_max": self.is_max,
            "angles": [np.asarray(m).tolist() for m in self.midpoints],
            "z": [np.asarray(z).tolist() for z in self.points],
        }


def _ascend(f: ProductAction, theta0: np.ndarray, steps: int = 25) -> np.ndarray:
    theta = theta0.copy()
    lr = 0.1
    value = f.value(theta)
    for _ in range(steps):
        g = f.gradient(theta)
        while lr > 1e-8:
            trial = theta + lr * g
            tv = f.value(trial)
            if tv >= value + 1e-4 * lr * (g @ g):
                theta, value = trial, tv
                lr *= 2.0
                break
            lr *= 0.5
    return theta


def _polish(f: ProductAction, theta: np.ndarray, iters: int = 20) -> np.ndarray:
    """Newton on the gradient with a least-squares step and backtracking on |grad|."""
    g = f.gradient(theta)
    for _ in range(iters):
        if np.max(np.abs(g)) < 1e-14:
            break
        step = np.linalg.lstsq(f.hessian(theta), -g, rcond=1e-10)[0]
        alpha, gg = 1.0, g @ g
        while alpha > 1e-6:
            trial = theta + alpha * step
            gt = f.gradient(trial)
            if gt @ gt < gg:
                break
            alpha *= 0.5
        else:
            break
        theta, g = trial, gt
    return theta


def _search_start(f: ProductAction, theta0: np.ndarray, saddles: bool) -> list[np.ndarray]:
    out = []
    up = _ascend(f, theta0)
    with warnings.catch_warnings():  # BFGS line-search chatter; results are polished and verified
        warnings.filterwarnings("ignore", category=RuntimeWarning, module=r"scipy\.optimize")
        res = minimize(
            lambda th: -f.value(th),
            up,
            jac=lambda th: -f.gradient(th),
            method="BFGS",
            options={"gtol": 1e-11, "maxiter": 1000},
        )
    out.append(_polish(f, res.x))
    if saddles:
        out.append(_polish(f, theta0, iters=80))
    return out


def _is_local_max(f: ProductAction, theta: np.ndarray) -> bool:
    h = fd_jacobian(f.gradient, theta, 1e-5)
    h = 0.5 * (h + h.T)
    eig = np.linalg.eigvalsh(h)
    return bool(eig[-1] <= 1e-6 * max(1.0, float(np.max(np.abs(eig)))))


def _tangency_residual(L: ProductCurveLagrangian, theta: np.ndarray, z: np.ndarray) -> float:
    k, n = theta.shape
    diff = np.roll(z, -1, axis=0) - z
    h = np.stack([diff[:, :n], diff[:, n:]], axis=-1)
    d1 = L.factor_derivatives(theta, 1)
    unit = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
    return float(np.max(np.abs(cross(unit, h))))


def _backtrack_margin(q: np.ndarray) -> float:
    return float(np.min(np.linalg.norm(q - np.roll(q, -1, axis=0), axis=1)))


def find_periodic_orbits(
    L: ProductCurveLagrangian,
    k: int,
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    threads: int = 1,
    saddles: bool = True,
) -> list[OrbitCandidate]:
    """Odd k-periodic orbit candidates from critical points of the action on L^k.

    Every start is pushed uphill (gradient ascent, then BFGS); with ``saddles``
    a Newton search for other critical points runs from the same start.
    Backtracking critical points are dropped and the rest deduplicated under
    the dihedral group, maxima tagged.
    """
    if not isinstance(L, ProductCurveLagrangian):
        raise PreconditionError("the orbit search needs a compact model (a product of closed curves)")
    if k < 3 or k % 2 == 0:
        raise PreconditionError("periodic orbits are constructed for odd k >= 3 only")
    f = ProductAction(L, k)
    rng = np.random.default_rng(seed)
    thetas0 = rng.uniform(0.0, 2.0 * np.pi, size=(starts, k * L.n))
    work = lambda th: _search_start(f, th, saddles)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(work, thetas0))
    else:
        raw = [work(th) for th in thetas0]

    cands: list[OrbitCandidate] = []
    for theta in (th for group in raw for th in group):
        g = f.gradient(theta)
        gnorm = float(np.max(np.abs(g)))
        if not np.isfinite(gnorm) or gnorm > GRAD_TOL:
            continue
        theta = wrap_angle(theta.reshape(k, L.n))
        q = L.points(theta)
        margin = _backtrack_margin(q)
        if margin < BACKTRACK_MARGIN:
            continue
        z = orbit_from_midpoints(q)
        cands.append(
            OrbitCandidate(
                k=k,
                midpoints=list(theta),
                points=list(z),
                action=f.value(theta),
                residual=_tangency_residual(L, theta, z),
                margin=margin,
                is_max=_is_local_max(f, theta.ravel()),
                grad_norm=gnorm,
            )
        )
    cands.sort(key=lambda c: (-round(c.action, 9), tuple(dihedral_canonical(np.array(c.midpoints)).ravel())))
    unique: list[OrbitCandidate] = []
    for c in cands:
        th = np.array(c.midpoints)
        if any(dihedral_distance(th, np.array(u.midpoints)) < DEDUPE_TOL for u in unique):
            continue
        unique.append(c)
    return unique


def orbit_verify(L: LagrangianModel, orbit: OrbitCandidate, tol: float = 1e-6) -> dict:
    """Check every consecutive pair is in correspondence and the orbit does not backtrack.

    For product models each planar projection must also close up under k
    steps of the planar outer billiard map.
    """
    k = orbit.k
    z = np.array(orbit.points, dtype=float)
    mids = np.array(orbit.midpoints, dtype=float)
    if isinstance(L, ProductCurveLagrangian):
        q = L.points(mids)
        mid_defect = float(np.max(np.abs(z + np.roll(z, -1, axis=0) - 2.0 * q)))
        tan_defect = _tangency_residual(L, mids, z)
        n = L.n
        planar, collapsed = [0.0], []
        for j, c in enumerate(L.curves):
            zj = np.stack([z[:, j], z[:, n + j]], axis=-1)
            # a factor whose points all sit on its curve carries no planar orbit
            if np.max(np.abs(zj - np.stack([q[:, j], q[:, n + j]], axis=-1))) <= COLLAPSE_TOL:
                collapsed.append(j)
                continue
            planar.append(planar_step_defect(c, zj)[0])
        planar_defect = float(max(planar))
    else:
        q = np.array([point_on_graph(L, m).flat() for m in mids])
        mid_defect = tan_defect = 0.0
        for i in range(k):
            a, b = DarbouxPoint.from_flat(z[i]), DarbouxPoint.from_flat(z[(i + 1) % k])
            chk = conormal_check(L, a, b)
            mid_defect = max(mid_defect, 2.0 * chk["midpoint_defect"])
            tan_defect = max(tan_defect, 2.0 * chk["tangency_defect"])
        mid_defect = max(mid_defect, float(np.max(np.abs(z + np.roll(z, -1, axis=0) - 2.0 * q))))
        planar_defect = 0.0
        collapsed = []
    margin = _backtrack_margin(q)
    max_defect = max(mid_defect, tan_defect, planar_defect)
    return {
        "ok": bool(max_defect <= tol and margin >= BACKTRACK_MARGIN),
        "max_defect": max_defect,
        "midpoint_defect": mid_defect,
        "tangency_defect": tan_defect,
        "planar_defect": planar_defect,
        "margin": margin,
        "backtracking": margin < BACKTRACK_MARGIN,
        "collapsed_factors": collapsed,
    }


def correspondence_jacobian(L: LagrangianGraph, a, q) -> np.ndarray:
    """Exact derivative of a -> partner(a) on the branch with foot ``q``.

    Differentiates grad F(q) + Hess F(q)(x - q) = y implicitly: dq = A^-1 (dy - H dx).
    """
    a = np.asarray(a, dtype=float)
    n = L.n
    q = np.asarray(q, dtype=float)
    A = matrix_A(L, TangentFrame(q, a[:n] - q))
    H = L.hess(q)
    dq = np.linalg.solve(A, np.hstack([-H, np.eye(n)]))
    return 2.0 * np.vstack([dq, H @ dq]) - np.eye(2 * n)


def correspondence_jacobian_defect(L: LagrangianGraph, a, q_guess, step: float = 1e-7) -> float:
    """Symplecticity defect of the finite-difference Jacobian of a -> partner(a) along one branch."""
    jac = fd_jacobian(lambda v: partner(L, v, q_guess), np.asarray(a, dtype=float), step)
    return is_symplectic(jac)[1]
