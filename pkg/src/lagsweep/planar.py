"""Planar (n = 1) outer billiards, tangent sweeps and the tractrix.

Everything here is written directly in terms of plane curves and cross
products, without going through the Lagrangian machinery, so it can serve as
an independent check on it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, InputError

TWO_PI = 2.0 * np.pi
CONVEXITY_SAMPLES = 720
STEP_SEEDS = 64
TRACTRIX_CUTOFF = 20.0

Branch = Literal["forward", "backward"]


def cross(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def wrap_angle(t):
    return np.mod(t, TWO_PI)


@dataclass(frozen=True)
class PlaneCurve:
    """A closed, counterclockwise, strictly convex plane curve.

    ``kind="ellipse"`` uses ``a``, ``b`` and ``center``; ``kind="trig"`` uses
    Fourier coefficients where ``cx[k]`` multiplies cos(k t) in the x coordinate
    (``k`` starting at 0) and so on.
    """

    kind: Literal["ellipse", "trig"]
    a: float = 1.0
    b: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    cx: tuple[float, ...] = ()
    sx: tuple[float, ...] = ()
    cy: tuple[float, ...] = ()
    sy: tuple[float, ...] = ()
    validate: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        if self.kind == "ellipse":
            if not (self.a > 0 and self.b > 0):
                raise InputError("ellipse semi-axes must be positive")
        elif self.kind == "trig":
            width = max(len(self.cx), len(self.sx), len(self.cy), len(self.sy))
            if width < 2:
                raise InputError("trig curve needs at least first harmonics")
            for name in ("cx", "sx", "cy", "sy"):
                coeffs = tuple(float(c) for c in getattr(self, name))
                object.__setattr__(self, name, coeffs + (0.0,) * (width - len(coeffs)))
        else:
            raise InputError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.validate and not self.is_strictly_convex():
            raise InputError("curve is not strictly convex and counterclockwise at the sampled parameters")

    @classmethod
    def ellipse(cls, a: float, b: float, center=(0.0, 0.0)) -> "PlaneCurve":
        return cls("ellipse", a=a, b=b, center=tuple(center))

    @classmethod
    def circle(cls, r: float = 1.0, center=(0.0, 0.0)) -> "PlaneCurve":
        return cls.ellipse(r, r, center)

    @classmethod
    def trig(cls, cx, sx, cy, sy) -> "PlaneCurve":
        return cls("trig", cx=tuple(cx), sx=tuple(sx), cy=tuple(cy), sy=tuple(sy))

    @classmethod
    def from_json(cls, obj: dict) -> "PlaneCurve":
        kind = obj.get("kind")
        if kind == "ellipse":
            extra = set(obj) - {"kind", "a", "b", "center"}
            if extra:
                raise InputError(f"unknown ellipse fields {sorted(extra)}")
            return cls.ellipse(float(obj["a"]), float(obj["b"]), tuple(obj.get("center", (0.0, 0.0))))
        if kind == "trig":
            extra = set(obj) - {"kind", "cx", "sx", "cy", "sy"}
            if extra:
                raise InputError(f"unknown trig fields {sorted(extra)}")
            return cls.trig(obj.get("cx", []), obj.get("sx", []), obj.get("cy", []), obj.get("sy", []))
        raise InputError(f"unknown curve kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "ellipse":
            return {"kind": "ellipse", "a": self.a, "b": self.b, "center": list(self.center)}
        return {"kind": "trig", "cx": list(self.cx), "sx": list(self.sx), "cy": list(self.cy), "sy": list(self.sy)}

    # -- derivatives ---------------------------------------------------

    def derivative(self, t, order: int = 0) -> np.ndarray:
        """d^order gamma / dt^order at t; result shape t.shape + (2,)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "ellipse":
            c, s = np.cos(t), np.sin(t)
            # d^m/dt^m (cos, sin) cycles with period 4
            cs = [(c, s), (-s, c), (-c, -s), (s, -c)][order % 4]
            out = np.stack([self.a * cs[0], self.b * cs[1]], axis=-1)
            if order == 0:
                out = out + np.asarray(self.center)
            return out
        k = np.arange(len(self.cx))
        kt = t[..., None] * k
        c, s = np.cos(kt), np.sin(kt)
        dc, ds = [(c, s), (-s, c), (-c, -s), (s, -c)][order % 4]
        scale = k.astype(float) ** order
        x = (np.asarray(self.cx) * scale * dc + np.asarray(self.sx) * scale * ds).sum(-1)
        y = (np.asarray(self.cy) * scale * dc + np.asarray(self.sy) * scale * ds).sum(-1)
        return np.stack([x, y], axis=-1)

    def point(self, t) -> np.ndarray:
        return self.derivative(t, 0)

    def tangent(self, t) -> np.ndarray:
        return self.derivative(t, 1)

    def signed_curvature(self, t) -> np.ndarray:
        d1, d2 = self.derivative(t, 1), self.derivative(t, 2)
        return cross(d1, d2) / np.linalg.norm(d1, axis=-1) ** 3

    def is_strictly_convex(self, samples: int = CONVEXITY_SAMPLES) -> bool:
        t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        return bool(np.all(self.signed_curvature(t) > 0.0))

    def support_gap(self, p) -> float:
        """max over samples of outward-normal distance; > 0 iff p is outside."""
        t = np.linspace(0.0, TWO_PI, CONVEXITY_SAMPLES, endpoint=False)
        d1 = self.tangent(t)
        normal = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / np.linalg.norm(d1, axis=-1)[:, None]
        return float(np.max(np.einsum("ij,ij->i", normal, np.asarray(p) - self.point(t))))

    def nearest_parameter(self, p) -> float:
        """Parameter of the curve point closest to p."""
        p = np.asarray(p, dtype=float)
        t = np.linspace(0.0, TWO_PI, CONVEXITY_SAMPLES, endpoint=False)
        t0 = float(t[np.argmin(np.linalg.norm(self.point(t) - p, axis=-1))])
        h = TWO_PI / CONVEXITY_SAMPLES
        for _ in range(30):
            d0, d1, d2 = self.point(t0) - p, self.tangent(t0), self.derivative(t0, 2)
            g = d0 @ d1
            gp = d1 @ d1 + d0 @ d2
            step = -g / gp if gp > 0 else -np.sign(g) * h
            step = float(np.clip(step, -h, h))
            t0 += step
            if abs(step) < 1e-15:
                break
        return float(wrap_angle(t0))


# -- outer billiard step ----------------------------------------------------


def _tangency(curve: PlaneCurve, a: np.ndarray, t: np.ndarray):
    """Tangency residual cross(gamma', a - gamma) and its t-derivative."""
    g0, g1, g2 = curve.point(t), curve.tangent(t), curve.derivative(t, 2)
    d = a - g0
    return cross(g1, d), cross(g2, d), d, g1


def tangency_parameters(curve: PlaneCurve, a, branch: Branch, seeds: int = STEP_SEEDS, iters: int = 60) -> np.ndarray:
    """Tangency parameters for a batch of exterior points ``a`` (shape (m, 2)).

    The residual crosses zero upward at the forward tangency and downward at
    the backward one, which selects the bracket; a safeguarded Newton
    iteration finishes the solve. Points with no bracket get NaN.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    grid = np.linspace(0.0, TWO_PI, seeds + 1)
    f = cross(curve.tangent(grid)[None, :, :], a[:, None, :] - curve.point(grid)[None, :, :])
    if branch == "forward":
        hit = (f[:, :-1] < 0) & (f[:, 1:] >= 0)
    else:
        hit = (f[:, :-1] > 0) & (f[:, 1:] <= 0)
    has = hit.any(axis=1)
    idx = np.argmax(hit, axis=1)
    rows = np.arange(a.shape[0])
    lo, hi = grid[idx], grid[idx + 1]
    flo = f[rows, idx]
    fhi = f[rows, idx + 1]
    t = np.where(fhi != flo, lo - flo * (hi - lo) / np.where(fhi != flo, fhi - flo, 1.0), 0.5 * (lo + hi))
    sign = 1.0 if branch == "forward" else -1.0
    active = np.flatnonzero(has)
    for _ in range(iters):
        if active.size == 0:
            break
        ta, la, ha = t[active], lo[active], hi[active]
        ft, dft, _, _ = _tangency(curve, a[active], ta)
        # keep the bracket oriented so that sign*f < 0 at lo
        below = sign * ft < 0
        la = np.where(below, ta, la)
        ha = np.where(below, ha, ta)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = ta - ft / dft
        bad = ~np.isfinite(tn) | (tn <= la) | (tn >= ha)
        tn = np.where(bad, 0.5 * (la + ha), tn)
        t[active], lo[active], hi[active] = tn, la, ha
        active = active[np.abs(tn - ta) > 1e-13]
    t = np.where(has, wrap_angle(t), np.nan)
    return t


def planar_outer_step(curve: PlaneCurve, a, branch: Branch = "forward") -> tuple[np.ndarray, float]:
    """Reflect the exterior point ``a`` through its tangency point.

    ``forward`` picks the tangent line for which ``a`` lies behind the
    tangency point with respect to the orientation, so the image lies ahead.
    Returns the image point and the tangency parameter.
    """
    if branch not in ("forward", "backward"):
        raise InputError(f"unknown branch {branch!r}")
    a = np.asarray(a, dtype=float)
    if curve.support_gap(a) <= 1e-12:
        raise DomainError(f"point {a.tolist()} is not strictly outside the curve")
    t = tangency_parameters(curve, a[None, :], branch)[0]
    if not np.isfinite(t):
        t = _fine_tangency(curve, a, branch)
    ft, _, d, g1 = _tangency(curve, a, np.asarray(t))
    residual = abs(float(ft)) / float(np.linalg.norm(g1))
    if residual > 1e-10 or (float(d @ g1) < 0) != (branch == "forward"):
        raise DomainError(f"tangency solve failed for {a.tolist()} (residual {residual:.3g})")
    b = 2.0 * curve.point(t) - a
    return b, float(t)


def _fine_tangency(curve: PlaneCurve, a: np.ndarray, branch: Branch) -> float:
    t = tangency_parameters(curve, a[None, :], branch, seeds=STEP_SEEDS * 256)[0]
    if not np.isfinite(t):
        raise DomainError(f"no {branch} tangent line found from {a.tolist()}")
    return float(t)


# -- planar periodic orbits -------------------------------------------------


def _sign_matrix(k: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    return np.where(i == j, 0.0, (-1.0) ** (i + j) * np.sign(j - i))


def planar_action(curve: PlaneCurve, t) -> float:
    """sum_{i<j} (-1)^{i+j} cross(gamma(t_i), gamma(t_j))."""
    p = curve.point(np.asarray(t, dtype=float))
    k = len(p)
    total = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            total += (-1.0) ** (i + j) * float(cross(p[i], p[j]))
    return total


def _planar_grad(curve: PlaneCurve, t: np.ndarray, c: np.ndarray) -> np.ndarray:
    p = curve.point(t)
    return cross(curve.tangent(t), c @ p)


def _planar_hess(curve: PlaneCurve, t: np.ndarray, c: np.ndarray) -> np.ndarray:
    p, d1, d2 = curve.point(t), curve.tangent(t), curve.derivative(t, 2)
    h = c * cross(d1[:, None, :], d1[None, :, :])
    h[np.diag_indices(len(t))] = cross(d2, c @ p)
    return h


@dataclass
class PlanarOrbit:
    params: np.ndarray  # tangency parameters t_i (midpoints gamma(t_i))
    points: np.ndarray  # orbit points z_i, shape (k, 2)
    action: float
    step_defect: float
    branch: Branch

    def to_json(self) -> dict:
        return {
            "params": self.params.tolist(),
            "z": self.points.tolist(),
            "action": self.action,
            "step_defect": self.step_defect,
            "branch": self.branch,
        }


def orbit_from_midpoints(mid: np.ndarray) -> np.ndarray:
    """Solve z_i + z_{i+1} = 2 m_i cyclically for odd k."""
    k = len(mid)
    if k % 2 == 0:
        raise InputError("midpoint inversion needs odd k")
    signs = (-1.0) ** np.arange(k)
    z = np.empty_like(mid)
    z[0] = signs @ mid
    for i in range(k - 1):
        z[i + 1] = 2.0 * mid[i] - z[i]
    return z


def planar_step_defect(curve: PlaneCurve, z: np.ndarray) -> tuple[float, Branch]:
    """How far ``z`` is from a k-cycle of one branch of the outer billiard map."""
    best: tuple[float, Branch] = (np.inf, "forward")
    k = len(z)
    for branch in ("forward", "backward"):
        try:
            defect = 0.0
            for i in range(k):
                b, _ = planar_outer_step(curve, z[i], branch)
                defect = max(defect, float(np.max(np.abs(b - z[(i + 1) % k]))))
        except DomainError:
            continue
        if defect < best[0]:
            best = (defect, branch)
    return best


def dihedral_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Smallest wrap-aware max-distance between ``u`` and any D_k image of ``v``.

    Angle tuples have shape (k,) or (k, n); the group acts on the first axis.
    """
    best = np.inf
    for seq in (v, v[::-1]):
        for r in range(len(v)):
            d = np.abs(np.mod(u - np.roll(seq, r, axis=0) + np.pi, TWO_PI) - np.pi)
            best = min(best, float(np.max(d)))
    return best


def dihedral_canonical(u: np.ndarray) -> np.ndarray:
    """Lexicographically smallest rotation/reflection of a wrapped angle tuple."""
    w = wrap_angle(np.asarray(u, dtype=float))
    cands = [np.roll(seq, r, axis=0) for seq in (w, w[::-1]) for r in range(len(w))]
    return min(cands, key=lambda c: tuple(np.ravel(c)))


def find_planar_periodic(
    curve: PlaneCurve,
    k: int,
    seed: int = 0,
    starts: int = 64,
    dedupe: float = 1e-5,
) -> list[PlanarOrbit]:
    """Critical points of the planar action that are genuine k-periodic orbits.

    Each start is pushed uphill with BFGS (maxima) and separately driven to a
    zero of the gradient with Newton's method (saddles); survivors must step
    around the curve back to themselves.
    """
    if k < 3 or k % 2 == 0:
        raise InputError("the variational search needs odd k >= 3")
    c = _sign_matrix(k)
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    for t0 in rng.uniform(0.0, TWO_PI, size=(starts, k)):
        with warnings.catch_warnings():  # BFGS line-search chatter; results are polished and verified
            warnings.filterwarnings("ignore", category=RuntimeWarning, module=r"scipy\.optimize")
            res = minimize(
                lambda t: -planar_action(curve, t),
                t0,
                jac=lambda t: -_planar_grad(curve, t, c),
                method="BFGS",
                options={"gtol": 1e-11, "maxiter": 500},
            )
        found.append(res.x)
        found.append(_newton_critical(curve, t0, c))
    orbits: list[PlanarOrbit] = []
    for t in found:
        t = _newton_critical(curve, t, c, iters=8)
        if not np.all(np.isfinite(t)) or np.max(np.abs(_planar_grad(curve, t, c))) > 1e-9:
            continue
        mid = curve.point(t)
        if np.min(np.linalg.norm(mid - np.roll(mid, -1, axis=0), axis=1)) < 1e-6:
            continue
        z = orbit_from_midpoints(mid)
        defect, branch = planar_step_defect(curve, z)
        if defect > 1e-8:
            continue
        t = wrap_angle(t)
        if any(dihedral_distance(t, o.params) < dedupe for o in orbits):
            continue
        orbits.append(PlanarOrbit(t, z, planar_action(curve, t), defect, branch))
    orbits.sort(key=lambda o: (-o.action, tuple(dihedral_canonical(o.params))))
    return orbits


def _newton_critical(curve: PlaneCurve, t0: np.ndarray, c: np.ndarray, iters: int = 60) -> np.ndarray:
    t = np.array(t0, dtype=float)
    g = _planar_grad(curve, t, c)
    for _ in range(iters):
        h = _planar_hess(curve, t, c)
        step = np.linalg.lstsq(h, -g, rcond=1e-12)[0]
        norm0 = g @ g
        alpha = 1.0
        while alpha > 1e-6:
            tn = t + alpha * step
            gn = _planar_grad(curve, tn, c)
            if gn @ gn < norm0 or norm0 < 1e-30:
                break
            alpha *= 0.5
        t, g = tn, gn
        if np.max(np.abs(g)) < 1e-13:
            break
    return t


# -- tangent sweeps ---------------------------------------------------------


def _tractrix_area_density(s: np.ndarray) -> np.ndarray:
    # y dx with x = s - tanh s, y = sech s
    sech = 1.0 / np.cosh(s)
    return sech * np.tanh(s) ** 2


def _adaptive_simpson(f, a: float, b: float, step: float, tol: float) -> float:
    """Vectorized adaptive Simpson rule starting from panels of width ``step``."""
    n = max(1, int(np.ceil((b - a) / step)))
    lo = np.linspace(a, b, n + 1)[:-1]
    hi = lo + (b - a) / n
    total = 0.0
    panel_tol = tol * (hi - lo) / (b - a)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        q1, q3 = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f1, f3 = f(q1), f(q3)
        whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
        halves = (hi - lo) / 12.0 * (flo + 4 * f1 + 2 * fmid + 4 * f3 + fhi)
        err = np.abs(halves - whole)
        ok = err <= 15.0 * panel_tol
        total += float(np.sum(halves[ok] + (halves[ok] - whole[ok]) / 15.0))
        if ok.all():
            break
        lo, hi, panel_tol = lo[~ok], hi[~ok], panel_tol[~ok]
        lo, hi = np.concatenate([lo, 0.5 * (lo + hi)]), np.concatenate([0.5 * (lo + hi), hi])
        panel_tol = np.concatenate([panel_tol, panel_tol]) * 0.5
    return total


def tractrix_area(step: float = 1e-3, half: bool = False) -> float:
    """Area between the tractrix (s - tanh s, sech s) and its asymptote."""
    if step <= 0:
        raise InputError("step must be positive")
    lo = 0.0 if half else -TRACTRIX_CUTOFF
    return _adaptive_simpson(_tractrix_area_density, lo, TRACTRIX_CUTOFF, step, tol=1e-12)


@dataclass(frozen=True)
class SweepRegion:
    """Tangent segments gamma(t) + s T(t), T the unit tangent, for s, t in the given ranges."""

    s_min: float = 0.0
    s_max: float = 1.0
    t_min: float = 0.0
    t_max: float = TWO_PI

    def __post_init__(self) -> None:
        if not (0.0 <= self.s_min <= self.s_max):
            raise InputError("need 0 <= s_min <= s_max")
        if not (self.t_max >= self.t_min and self.t_max - self.t_min <= TWO_PI + 1e-12):
            raise InputError("parameter range must have length in [0, 2 pi]")

    def contains_param(self, t: np.ndarray) -> np.ndarray:
        if self.t_max - self.t_min >= TWO_PI:
            return np.ones_like(t, dtype=bool)
        return wrap_angle(t - self.t_min) <= (self.t_max - self.t_min)


def _unit_tangent_angle(curve: PlaneCurve, t) -> np.ndarray:
    d1 = curve.tangent(t)
    return np.arctan2(d1[..., 1], d1[..., 0])


def _sweep_membership(curve: PlaneCurve, region: SweepRegion, pts: np.ndarray) -> np.ndarray:
    # on the forward tangent ray from gamma(t): pts lies ahead, i.e. the backward branch of the step
    t = tangency_parameters(curve, pts, "backward")
    ok = np.isfinite(t)
    tt = np.where(ok, t, 0.0)
    d1 = curve.tangent(tt)
    s = np.einsum("ij,ij->i", pts - curve.point(tt), d1) / np.linalg.norm(d1, axis=-1)
    return ok & (s >= region.s_min) & (s <= region.s_max) & region.contains_param(tt)


def _cluster_membership(curve: PlaneCurve, region: SweepRegion, pts: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(pts, axis=1)
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    t = _parameter_for_tangent_angle(curve, phi)
    return (r >= region.s_min) & (r <= region.s_max) & region.contains_param(t)


def _parameter_for_tangent_angle(curve: PlaneCurve, phi: np.ndarray) -> np.ndarray:
    """Invert the (monotone) tangent-direction map t -> angle of gamma'(t)."""
    grid = np.linspace(0.0, TWO_PI, 4 * CONVEXITY_SAMPLES + 1)
    ang = np.unwrap(_unit_tangent_angle(curve, grid))
    base = ang[0]
    target = base + np.mod(phi - base, TWO_PI)
    t = np.interp(target, ang, grid)
    for _ in range(4):
        d1, d2 = curve.tangent(t), curve.derivative(t, 2)
        cur = base + np.mod(_unit_tangent_angle(curve, t) - base, TWO_PI)
        diff = np.mod(target - cur + np.pi, TWO_PI) - np.pi
        rate = cross(d1, d2) / np.einsum("...j,...j->...", d1, d1)
        t = t + diff / rate
    return wrap_angle(t)


def mamikon_area_check(
    curve: PlaneCurve,
    region: SweepRegion,
    samples: int = 1_000_000,
    seed: int = 0,
    chunks: int = 16,
) -> tuple[float, float]:
    """Monte Carlo areas of a tangent sweep and of its tangent cluster.

    Both estimates use the same seeded sample budget, drawn uniformly from a
    bounding box of each region in fixed-size partitions.
    """
    if region.s_max == 0.0:
        return 0.0, 0.0
    t = np.linspace(0.0, TWO_PI, CONVEXITY_SAMPLES, endpoint=False)
    pts = curve.point(t)
    reach = np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)) + region.s_max
    sweep_box = (pts.mean(axis=0) - reach, pts.mean(axis=0) + reach)
    cluster_box = (-np.full(2, region.s_max), np.full(2, region.s_max))
    streams = np.random.SeedSequence(seed).spawn(2 * chunks)
    sizes = np.full(chunks, samples // chunks)
    sizes[: samples % chunks] += 1

    def estimate(box, member, seeds) -> float:
        lo, hi = box
        hits = 0
        for n, ss in zip(sizes, seeds):
            u = np.random.default_rng(ss).uniform(lo, hi, size=(int(n), 2))
            hits += int(np.count_nonzero(member(curve, region, u)))
        return float(np.prod(hi - lo)) * hits / samples

    return (
        estimate(sweep_box, _sweep_membership, streams[:chunks]),
        estimate(cluster_box, _cluster_membership, streams[chunks:]),
    )
