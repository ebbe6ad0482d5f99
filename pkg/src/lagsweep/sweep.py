"""The tangent-sweep map, local multiplicity of tangent spaces, Newton numbers."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import GenericityError, InputError, PreconditionError
from .lagrangian import (
    LagrangianGraph,
    TangentFrame,
    in_critical_set,
    tangent_point,
)
from .polyfun import SparsePolynomial
from .symplectic import DEFAULT_FD_STEP, DarbouxPoint, fd_jacobian, pullback

NEWTON_MAX_ITER = 60
NEWTON_TOL = 1e-10
ESCAPE = 1e8  # starts drifting beyond this are abandoned
STALL_RATIO = 0.999
CHUNK = 256  # starts per Newton batch; fixed so results do not depend on thread count


@dataclass(frozen=True)
class SweepSample:
    frame: TangentFrame
    source: DarbouxPoint
    target: DarbouxPoint


def sweep_map(L: LagrangianGraph, frame: TangentFrame) -> SweepSample:
    """Point (X, Y) on the tangent space and its parallel translate (x, y) = (t, Hess F t)."""
    source = tangent_point(L, frame)
    target = DarbouxPoint(frame.t.copy(), L.hess(frame.q) @ frame.t)
    return SweepSample(frame, source, target)


def _source_flat(L: LagrangianGraph, n: int):
    return lambda v: tangent_point(L, TangentFrame(v[:n], v[n:])).flat()


def _target_flat(L: LagrangianGraph, n: int):
    return lambda v: sweep_map(L, TangentFrame(v[:n], v[n:])).target.flat()


def sweep_jacobians(L: LagrangianGraph, frame: TangentFrame, step: float = DEFAULT_FD_STEP):
    n = L.n
    v = np.concatenate([frame.q, frame.t])
    return fd_jacobian(_source_flat(L, n), v, step), fd_jacobian(_target_flat(L, n), v, step)


def verify_symplectomorphism(
    L: LagrangianGraph,
    frame: TangentFrame,
    step: float = DEFAULT_FD_STEP,
    tol: float = 1e-6,
    require_regular: bool = True,
) -> dict:
    """Compare the pullbacks of omega along (q, t) -> source and (q, t) -> target.

    Equality of the two pulled-back forms on (q, t)-space is the statement that
    the sweep map is symplectic wherever it is locally defined; no inversion
    of the source map is needed.
    """
    if require_regular and in_critical_set(L, frame):
        raise PreconditionError("frame lies on the critical set; the sweep map is not locally defined there")
    j_src, j_tgt = sweep_jacobians(L, frame, step)
    defect = float(np.max(np.abs(pullback(j_src) - pullback(j_tgt))))
    return {"defect": defect, "ok": defect <= tol, "tol": tol, "step": step}


def critical_function(L: LagrangianGraph, x) -> SparsePolynomial:
    """x . grad F(q) - q . grad F(q) + 2 F(q), as a polynomial in q."""
    x = np.asarray(x, dtype=float)
    n = L.n
    if x.shape != (n,):
        raise InputError(f"x must have length {n}")
    out = L.F.scale(2.0)
    for i, g in enumerate(L.grad_polys):
        out = out + g.scale(float(x[i])) - SparsePolynomial.variable(n, i) * g
    return out


# -- multiplicity -----------------------------------------------------------


@dataclass
class RootReport:
    """Feet q whose tangent spaces pass through a test point."""

    roots: list[np.ndarray]
    residuals: list[float]
    flagged_near_critical: list[int]  # indices into roots
    count: int
    starts: int
    converged_starts: int
    all_diverged: bool = False
    diagnostics: list[str] = field(default_factory=list)

    def counted_roots(self) -> list[np.ndarray]:
        flagged = set(self.flagged_near_critical)
        return [r for i, r in enumerate(self.roots) if i not in flagged]

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "roots": [r.tolist() for r in self.roots],
            "residuals": self.residuals,
            "flagged_near_critical": self.flagged_near_critical,
            "starts": self.starts,
            "converged_starts": self.converged_starts,
            "all_diverged": self.all_diverged,
            "diagnostics": self.diagnostics,
        }


def _as_box(box, n: int) -> tuple[np.ndarray, np.ndarray]:
    if box is None:
        return -np.ones(n), np.ones(n)
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)).copy() for b in box)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise InputError("box must be bounded with hi > lo")
    return lo, hi


def _residual(L: LagrangianGraph, q: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # grad of the critical function minus y: grad F(q) + Hess F(q)(x - q) - y
    g, h = L.grad_hess(q)
    return g + np.einsum("...ij,...j->...i", h, x - q) - y


def _newton_batch(L: LagrangianGraph, q0: np.ndarray, x: np.ndarray, y: np.ndarray, max_iter: int):
    """Damped Newton with Armijo backtracking on 0.5 |residual|^2, for a batch of starts.

    Rows leave the active set once converged to rounding, escaped, or stalled
    (less than 0.1% merit progress in an iteration); the start grid is dense
    enough that every root is still reached from several starts.
    """
    q = q0.copy()
    r = _residual(L, q, x, y)
    merit = 0.5 * np.sum(r * r, axis=-1)
    active = np.ones(len(q), dtype=bool)
    for _ in range(max_iter):
        active &= (np.max(np.abs(r), axis=-1) > 1e-15) & (np.max(np.abs(q), axis=-1) < ESCAPE)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        qa, ra, ma = q[idx], r[idx], merit[idx]
        jac = np.einsum("mijk,mk->mij", L.third(qa), x - qa)  # matrix A(q, x - q)
        step = -np.einsum("mij,mj->mi", np.linalg.pinv(jac, rcond=1e-13), ra)
        alpha = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        before = ma.copy()
        for _ in range(20):
            sub = np.flatnonzero(pending)
            if sub.size == 0:
                break
            trial = qa[sub] + alpha[sub, None] * step[sub]
            rt = _residual(L, trial, x, y)
            mt = 0.5 * np.sum(rt * rt, axis=-1)
            ok = mt <= (1.0 - 1e-4 * alpha[sub]) * ma[sub]
            acc = sub[ok]
            qa[acc], ra[acc], ma[acc] = trial[ok], rt[ok], mt[ok]
            pending[acc] = False
            alpha[sub[~ok]] *= 0.5
        q[idx], r[idx], merit[idx] = qa, ra, ma
        tiny = np.max(np.abs(alpha[:, None] * step), axis=-1) <= 1e-15 * (1.0 + np.max(np.abs(qa), axis=-1))
        # creeping toward a nonzero minimum of the merit: no root nearby
        stalled = (ma > 1e-20) & (ma > STALL_RATIO * before)
        active[idx[pending | tiny | stalled]] = False
    return q, np.max(np.abs(r), axis=-1)


def count_tangent_spaces(
    L: LagrangianGraph,
    test: DarbouxPoint,
    box=None,
    grid: int = 12,
    tol: float = NEWTON_TOL,
    crit_tol: float = 1e-9,
    threads: int = 1,
    max_iter: int = NEWTON_MAX_ITER,
) -> RootReport:
    """Count tangent spaces of L through ``test`` with foot parameter in ``box``.

    Solves grad_q(x . F_q - q . F_q + 2F) = y from every node of a
    ``grid``-per-axis lattice over the box. Roots whose frame lies near the
    critical set are reported but not counted.
    """
    n = L.n
    if test.n != n:
        raise InputError(f"test point has dimension {test.n}, model has {n}")
    if grid < 8:
        raise InputError("grid must have at least 8 points per axis")
    lo, hi = _as_box(box, n)
    axes = [np.linspace(lo[i], hi[i], grid) for i in range(n)]
    starts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    x, y = test.x, test.y

    chunks = [starts[i : i + CHUNK] for i in range(0, len(starts), CHUNK)]
    work = lambda c: _newton_batch(L, c, x, y, max_iter)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    q_all = np.concatenate([r[0] for r in results])
    res_all = np.concatenate([r[1] for r in results])

    slack = 1e-9 * (hi - lo)
    good = (res_all <= tol) & np.all((q_all >= lo - slack) & (q_all <= hi + slack), axis=-1)
    cand = q_all[good]
    cand_res = res_all[good]
    order = np.lexsort(cand.T[::-1]) if len(cand) else np.array([], dtype=int)
    radius = 1e-6 * float(np.linalg.norm(hi - lo))
    roots: list[np.ndarray] = []
    residuals: list[float] = []
    for i in order:
        if any(np.linalg.norm(cand[i] - r) <= radius for r in roots):
            continue
        roots.append(cand[i])
        residuals.append(float(cand_res[i]))

    flagged = [i for i, r in enumerate(roots) if in_critical_set(L, TangentFrame(r, x - r), crit_tol)]
    report = RootReport(
        roots=roots,
        residuals=residuals,
        flagged_near_critical=flagged,
        count=len(roots) - len(flagged),
        starts=len(starts),
        converged_starts=int(np.count_nonzero(good)),
    )
    if not np.any(res_all <= tol):
        report.all_diverged = True
        report.diagnostics.append("no Newton start converged")
    return report


# -- Newton numbers ---------------------------------------------------------


def newton_number(intercepts: Sequence[int]) -> int:
    """Newton number of the simplex with axis intercepts d_1..d_n.

    Evaluates n! V_n - (n-1)! V_{n-1} + ... + (-1)^n, where V_k sums the
    k-volumes of the coordinate k-faces, and checks it against prod(d_i - 1).
    """
    d = [int(v) for v in intercepts]
    if not d or any(v < 1 for v in d):
        raise InputError("intercepts must be positive integers")
    n = len(d)
    total = Fraction(0)
    for k in range(n + 1):
        volume = sum((Fraction(math.prod(s), math.factorial(k)) for s in itertools.combinations(d, k)), Fraction(0))
        total += (-1) ** (n - k) * math.factorial(k) * volume
    closed = math.prod(v - 1 for v in d)
    if total != closed:
        raise AssertionError(f"alternating sum {total} disagrees with closed form {closed}")
    return int(total)


def predicted_multiplicity(L: LagrangianGraph, x) -> int:
    """Generic local multiplicity 2^(n - m), m the number of nonzero entries of x.

    Assumes the Kouchnirenko genericity of the germ, which cannot be
    certified; only the cubic-diagonal condition is checked.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (L.n,):
        raise InputError(f"x must have length {L.n}")
    if not L.has_cubic_diagonal():
        raise GenericityError("F lacks a nonzero q_i^3 term for some i")
    m = int(np.count_nonzero(x))
    return newton_number([2] * m + [3] * (L.n - m))
