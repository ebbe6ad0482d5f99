"""Linear symplectic algebra in Darboux coordinates.

Convention used throughout the package: a point of R^{2n} is stored as the
flat vector (x_1..x_n, y_1..y_n) and

    omega((x, y), (x', y')) = x . y' - y . x'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError

DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class DarbouxPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise InputError(f"x and y must be equal-length vectors, got {x.shape} and {y.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def from_flat(cls, v) -> "DarbouxPoint":
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size % 2:
            raise InputError("flat Darboux vector must have even length")
        n = v.size // 2
        return cls(v[:n], v[n:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def __add__(self, other: "DarbouxPoint") -> "DarbouxPoint":
        return DarbouxPoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "DarbouxPoint") -> "DarbouxPoint":
        return DarbouxPoint(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "DarbouxPoint":
        return DarbouxPoint(s * self.x, s * self.y)

    __rmul__ = __mul__

    def to_json(self) -> list[float]:
        return self.flat().tolist()


def _as_flat(a) -> np.ndarray:
    return a.flat() if isinstance(a, DarbouxPoint) else np.asarray(a, dtype=float)


def omega(a, b) -> float:
    """Standard symplectic pairing of two Darboux points (or flat vectors)."""
    u, v = _as_flat(a), _as_flat(b)
    if u.shape != v.shape or u.size % 2:
        raise InputError(f"dimension mismatch: {u.shape} vs {v.shape}")
    n = u.size // 2
    return float(u[:n] @ v[n:] - u[n:] @ v[:n])


def omega_matrix(n: int) -> np.ndarray:
    """Matrix of omega in the (x, y) basis: omega(u, v) = u^T W v."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], point, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``point``."""
    if step <= 0:
        raise InputError("step must be positive")
    p = np.asarray(point, dtype=float)
    cols = []
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = step
        cols.append((np.asarray(fn(p + e), dtype=float) - np.asarray(fn(p - e), dtype=float)) / (2 * step))
    return np.column_stack(cols)


def pullback(jac: np.ndarray) -> np.ndarray:
    """J^T W J: the pulled-back form as a matrix on the source space."""
    m = jac.shape[0]
    if m % 2:
        raise InputError("target dimension must be even")
    return jac.T @ omega_matrix(m // 2) @ jac


def is_symplectic(jac: np.ndarray, tol: float = 1e-9) -> tuple[bool, float]:
    """Return (ok, defect) with defect = max |J^T W J - W|."""
    jac = np.asarray(jac, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1] or jac.shape[0] % 2:
        raise InputError(f"expected a square matrix of even size, got {jac.shape}")
    w = omega_matrix(jac.shape[0] // 2)
    defect = float(np.max(np.abs(jac.T @ w @ jac - w)))
    return defect <= tol, defect
