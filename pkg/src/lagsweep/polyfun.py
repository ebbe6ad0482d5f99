"""Sparse multivariate polynomials with real coefficients and exact differentiation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

Exponents = tuple[int, ...]


def _grlex_key(e: Exponents) -> tuple:
    return (sum(e), e)


@dataclass(frozen=True)
class SparsePolynomial:
    """Immutable polynomial in ``nvars`` variables.

    Terms are kept in graded-lexicographic order with like terms collected and
    zero coefficients dropped, so two polynomials are equal iff they are
    structurally equal.
    """

    nvars: int
    terms: tuple[tuple[Exponents, float], ...] = ()

    def __post_init__(self) -> None:
        if self.nvars < 1:
            raise InputError("nvars must be positive")
        seen = set()
        for e, c in self.terms:
            if len(e) != self.nvars:
                raise InputError(f"exponent tuple {e} does not have length {self.nvars}")
            if any(k < 0 for k in e):
                raise InputError(f"negative exponent in {e}")
            if c == 0.0:
                raise InputError("zero coefficient stored")
            if not math.isfinite(c):
                raise InputError(f"non-finite coefficient {c}")
            if e in seen:
                raise InputError(f"duplicate exponent tuple {e}")
            seen.add(e)

    @classmethod
    def from_terms(cls, nvars: int, terms: Iterable[tuple[Sequence[int], float]]) -> "SparsePolynomial":
        """Build a normalized polynomial, collecting like terms."""
        acc: dict[Exponents, float] = {}
        for e, c in terms:
            key = tuple(int(k) for k in e)
            acc[key] = acc.get(key, 0.0) + float(c)
        return cls._from_dict(nvars, acc)

    @classmethod
    def _from_dict(cls, nvars: int, acc: Mapping[Exponents, float]) -> "SparsePolynomial":
        items = sorted(((e, c) for e, c in acc.items() if c != 0.0), key=lambda ec: _grlex_key(ec[0]))
        return cls(nvars, tuple(items))

    @classmethod
    def zero(cls, nvars: int) -> "SparsePolynomial":
        return cls(nvars, ())

    @classmethod
    def constant(cls, nvars: int, c: float) -> "SparsePolynomial":
        return cls.from_terms(nvars, [((0,) * nvars, c)])

    @classmethod
    def variable(cls, nvars: int, i: int) -> "SparsePolynomial":
        """The coordinate polynomial q_i (0-based index)."""
        e = [0] * nvars
        e[i] = 1
        return cls.from_terms(nvars, [(e, 1.0)])

    # -- serialization -------------------------------------------------

    @classmethod
    def from_json(cls, obj: Mapping) -> "SparsePolynomial":
        """Parse the literal ``{"nvars": n, "terms": [{"e": [...], "c": ...}, ...]}``."""
        if not isinstance(obj, Mapping) or set(obj) - {"nvars", "terms"}:
            raise InputError("polynomial literal must have exactly the keys 'nvars' and 'terms'")
        nvars = int(obj["nvars"])
        terms = []
        for t in obj.get("terms", []):
            if set(t) != {"e", "c"}:
                raise InputError(f"malformed term {t!r}")
            terms.append((t["e"], t["c"]))
        return cls.from_terms(nvars, terms)

    def to_json(self) -> dict:
        return {"nvars": self.nvars, "terms": [{"e": list(e), "c": c} for e, c in self.terms]}

    # -- structure -----------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, e: Sequence[int]) -> float:
        key = tuple(e)
        for ee, c in self.terms:
            if ee == key:
                return c
        return 0.0

    def split_by_degree(self) -> dict[int, "SparsePolynomial"]:
        """Homogeneous components keyed by total degree."""
        parts: dict[int, list] = {}
        for e, c in self.terms:
            parts.setdefault(sum(e), []).append((e, c))
        return {d: SparsePolynomial(self.nvars, tuple(ts)) for d, ts in sorted(parts.items())}

    # -- arithmetic ----------------------------------------------------

    def _check_same(self, other: "SparsePolynomial") -> None:
        if other.nvars != self.nvars:
            raise InputError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        self._check_same(other)
        acc = dict(self.terms)
        for e, c in other.terms:
            acc[e] = acc.get(e, 0.0) + c
        return SparsePolynomial._from_dict(self.nvars, acc)

    def __neg__(self) -> "SparsePolynomial":
        return self.scale(-1.0)

    def __sub__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        return self + (-other)

    def scale(self, s: float) -> "SparsePolynomial":
        return SparsePolynomial._from_dict(self.nvars, {e: s * c for e, c in self.terms})

    def __mul__(self, other: "SparsePolynomial | float") -> "SparsePolynomial":
        if not isinstance(other, SparsePolynomial):
            return self.scale(float(other))
        self._check_same(other)
        acc: dict[Exponents, float] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0.0) + c1 * c2
        return SparsePolynomial._from_dict(self.nvars, acc)

    __rmul__ = __mul__

    # -- calculus ------------------------------------------------------

    def partial(self, i: int) -> "SparsePolynomial":
        """Exact partial derivative with respect to q_i (0-based)."""
        if not 0 <= i < self.nvars:
            raise InputError(f"variable index {i} out of range for nvars={self.nvars}")
        acc: dict[Exponents, float] = {}
        for e, c in self.terms:
            if e[i] == 0:
                continue
            de = e[:i] + (e[i] - 1,) + e[i + 1 :]
            acc[de] = acc.get(de, 0.0) + c * e[i]
        return SparsePolynomial._from_dict(self.nvars, acc)

    def gradient(self) -> list["SparsePolynomial"]:
        return [self.partial(i) for i in range(self.nvars)]

    def hessian(self) -> list[list["SparsePolynomial"]]:
        n = self.nvars
        grad = self.gradient()
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                out[i][j] = out[j][i] = grad[i].partial(j)
        return out

    def third_tensor(self) -> list[list[list["SparsePolynomial"]]]:
        n = self.nvars
        hess = self.hessian()
        out = [[[None] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    d = hess[i][j].partial(k)
                    for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                        out[a][b][c] = d
        return out

    # -- evaluation ----------------------------------------------------

    def __call__(self, q) -> float | np.ndarray:
        return self.eval(q)

    def eval(self, q) -> float | np.ndarray:
        """Evaluate at ``q`` of shape (nvars,) or, batched, (..., nvars)."""
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.nvars,):
            raise InputError(f"expected trailing dimension {self.nvars}, got shape {q.shape}")
        out = np.zeros(q.shape[:-1])
        for e, c in self.terms:
            mono = np.full(q.shape[:-1], c)
            for i, k in enumerate(e):
                if k:
                    mono = mono * q[..., i] ** k
            out = out + mono
        return float(out) if out.ndim == 0 else out

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            mono = "*".join(f"q{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def eval_array(polys, q) -> np.ndarray:
    """Evaluate a nested list of polynomials; result has the list shape plus q's batch shape."""
    if isinstance(polys, SparsePolynomial):
        return np.asarray(polys.eval(q))
    return np.stack([eval_array(p, q) for p in polys])


class CompiledPolys:
    """A nested list of polynomials over one shared monomial basis.

    Evaluation computes every monomial once and contracts with a dense
    coefficient array, which is much faster than term-by-term loops for
    batched Newton iterations.
    """

    def __init__(self, polys, nvars: int):
        shape = np.shape(np.empty(_nested_shape(polys)))
        flat = list(_flatten(polys))
        basis = sorted({e for P in flat for e, _ in P.terms}, key=_grlex_key)
        index = {e: j for j, e in enumerate(basis)}
        coeffs = np.zeros((len(basis), len(flat)))
        for col, P in enumerate(flat):
            for e, c in P.terms:
                coeffs[index[e], col] = c
        self.nvars = nvars
        self.shape = shape
        self.exponents = np.array(basis, dtype=float).reshape(len(basis), nvars)
        self.coeffs = coeffs

    def __call__(self, q) -> np.ndarray:
        """Values with shape (batch..., list shape...)."""
        q = np.asarray(q, dtype=float)
        mono = np.prod(q[..., None, :] ** self.exponents, axis=-1)
        return (mono @ self.coeffs).reshape(q.shape[:-1] + self.shape)


def _nested_shape(polys) -> tuple[int, ...]:
    if isinstance(polys, SparsePolynomial):
        return ()
    return (len(polys),) + _nested_shape(polys[0])


def _flatten(polys):
    if isinstance(polys, SparsePolynomial):
        yield polys
    else:
        for p in polys:
            yield from _flatten(p)


def monomial(nvars: int, e: Sequence[int], c: float = 1.0) -> SparsePolynomial:
    return SparsePolynomial.from_terms(nvars, [(e, c)])
