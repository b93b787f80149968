"""Vector-field systems X = (X_1, ..., X_m) with closed-form coefficients.

Coefficients live in a small expression algebra: finite sums of

    c * prod_i x_i**a_i * sin(x_i)**s_i * cos(x_i)**q_i

with rational ``c`` and nonnegative integer powers.  The algebra is closed
under addition, multiplication and partial differentiation, which is all that
is needed to expand

    Delta_X u = sum_k ( X_k X_k u + (div X_k) X_k u ).

Coefficients are stored as :class:`fractions.Fraction` so that canonical forms
compare exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "CoefficientExpr",
    "VectorField",
    "VectorFieldSystem",
    "SYSTEM_TAGS",
    "builtin_system",
    "system_from_table",
    "divergence",
    "apply_field",
    "delta_x_symbolic",
    "carre_du_champ",
]

SYSTEM_TAGS = ("euclidean", "constant", "trig-bounded", "grushin", "engel")

# (powers, sin powers, cos powers)
Key = tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    return Fraction(float(c))


def _bump(t: tuple[int, ...], i: int, d: int) -> tuple[int, ...]:
    out = list(t)
    out[i] += d
    return tuple(out)


@dataclass(frozen=True)
class CoefficientExpr:
    """Canonical sum of monomial-times-trig terms in ``n`` variables."""

    n: int
    terms: tuple[tuple[Key, Fraction], ...] = ()

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[Key, object]]) -> "CoefficientExpr":
        acc: dict[Key, Fraction] = {}
        for key, c in terms:
            pw, sn, cs = (tuple(int(v) for v in part) for part in key)
            if not (len(pw) == len(sn) == len(cs) == n):
                raise ValueError(f"term {key!r} does not have dimension {n}")
            if min(pw + sn + cs, default=0) < 0:
                raise ValueError("powers must be nonnegative")
            k = (pw, sn, cs)
            acc[k] = acc.get(k, Fraction(0)) + _as_fraction(c)
        items = tuple(sorted((k, c) for k, c in acc.items() if c != 0))
        return cls(n, items)

    @classmethod
    def constant(cls, n: int, c=1) -> "CoefficientExpr":
        z = (0,) * n
        return cls.from_terms(n, [((z, z, z), c)])

    @classmethod
    def zero(cls, n: int) -> "CoefficientExpr":
        return cls(n, ())

    @classmethod
    def monomial(cls, n: int, powers: Sequence[int], c=1) -> "CoefficientExpr":
        z = (0,) * n
        return cls.from_terms(n, [((tuple(powers), z, z), c)])

    @classmethod
    def variable(cls, n: int, i: int, power: int = 1) -> "CoefficientExpr":
        return cls.monomial(n, _bump((0,) * n, i, power))

    @classmethod
    def sin(cls, n: int, i: int) -> "CoefficientExpr":
        z = (0,) * n
        return cls.from_terms(n, [((z, _bump(z, i, 1), z), 1)])

    @classmethod
    def cos(cls, n: int, i: int) -> "CoefficientExpr":
        z = (0,) * n
        return cls.from_terms(n, [((z, z, _bump(z, i, 1)), 1)])

    # -- algebra -----------------------------------------------------------

    def _coerce(self, other) -> "CoefficientExpr":
        if isinstance(other, CoefficientExpr):
            if other.n != self.n:
                raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
            return other
        return CoefficientExpr.constant(self.n, other)

    def __add__(self, other) -> "CoefficientExpr":
        other = self._coerce(other)
        return CoefficientExpr.from_terms(self.n, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self) -> "CoefficientExpr":
        return CoefficientExpr(self.n, tuple((k, -c) for k, c in self.terms))

    def __sub__(self, other) -> "CoefficientExpr":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "CoefficientExpr":
        return self._coerce(other) - self

    def __mul__(self, other) -> "CoefficientExpr":
        if not isinstance(other, CoefficientExpr):
            c = _as_fraction(other)
            return CoefficientExpr.from_terms(self.n, [(k, c * v) for k, v in self.terms])
        other = self._coerce(other)
        out = []
        for (p1, s1, c1), a in self.terms:
            for (p2, s2, c2), b in other.terms:
                key = (
                    tuple(x + y for x, y in zip(p1, p2)),
                    tuple(x + y for x, y in zip(s1, s2)),
                    tuple(x + y for x, y in zip(c1, c2)),
                )
                out.append((key, a * b))
        return CoefficientExpr.from_terms(self.n, out)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "CoefficientExpr":
        return self * (1 / _as_fraction(c))

    def __pow__(self, k: int) -> "CoefficientExpr":
        if k < 0:
            raise ValueError("negative powers leave the algebra")
        out = CoefficientExpr.constant(self.n, 1)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, i: int) -> "CoefficientExpr":
        """Partial derivative with respect to ``x_i`` (0-based)."""
        out = []
        for (pw, sn, cs), c in self.terms:
            if pw[i]:
                out.append(((_bump(pw, i, -1), sn, cs), c * pw[i]))
            if sn[i]:
                # d sin^s = s sin^{s-1} cos
                out.append(((pw, _bump(sn, i, -1), _bump(cs, i, 1)), c * sn[i]))
            if cs[i]:
                # d cos^q = -q cos^{q-1} sin
                out.append(((pw, _bump(sn, i, 1), _bump(cs, i, -1)), -c * cs[i]))
        return CoefficientExpr.from_terms(self.n, out)

    # -- inspection --------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(not any(pw) and not any(sn) and not any(cs) for (pw, sn, cs), _ in self.terms)

    @property
    def bounded(self) -> bool:
        """True iff no term carries a polynomial factor."""
        return all(not any(pw) for (pw, _, _), _ in self.terms)

    @property
    def has_trig(self) -> bool:
        return any(any(sn) or any(cs) for (_, sn, cs), _ in self.terms)

    @property
    def degree(self) -> int:
        return max((sum(pw) for (pw, _, _), _ in self.terms), default=0)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("expression is not constant")
        return float(sum((c for _, c in self.terms), Fraction(0)))

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"points have dimension {x.shape[-1]}, expected {self.n}")
        out = np.zeros(x.shape[:-1])
        if not self.terms:
            return out
        need_sin = {i for (_, sn, _), _ in self.terms for i in range(self.n) if sn[i]}
        need_cos = {i for (_, _, cs), _ in self.terms for i in range(self.n) if cs[i]}
        sins = {i: np.sin(x[..., i]) for i in need_sin}
        coss = {i: np.cos(x[..., i]) for i in need_cos}
        for (pw, sn, cs), c in self.terms:
            val = np.full(x.shape[:-1], float(c))
            for i in range(self.n):
                if pw[i]:
                    val = val * x[..., i] ** pw[i]
                if sn[i]:
                    val = val * sins[i] ** sn[i]
                if cs[i]:
                    val = val * coss[i] ** cs[i]
            out = out + val
        return out

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (pw, sn, cs), c in self.terms:
            factors = [str(c)] if c != 1 or not (any(pw) or any(sn) or any(cs)) else []
            for i in range(self.n):
                if pw[i]:
                    factors.append(f"x{i + 1}" + (f"^{pw[i]}" if pw[i] > 1 else ""))
                if sn[i]:
                    factors.append(f"sin(x{i + 1})" + (f"^{sn[i]}" if sn[i] > 1 else ""))
                if cs[i]:
                    factors.append(f"cos(x{i + 1})" + (f"^{cs[i]}" if cs[i] > 1 else ""))
            parts.append("*".join(factors))
        return " + ".join(parts)


@dataclass(frozen=True)
class VectorField:
    """X = sum_i a_i(x) d/dx_i."""

    coeffs: tuple[CoefficientExpr, ...]

    def __post_init__(self):
        ns = {c.n for c in self.coeffs}
        if ns != {len(self.coeffs)}:
            raise ValueError("coefficient dimension must equal the number of coefficients")

    @property
    def n(self) -> int:
        return len(self.coeffs)


def divergence(field: VectorField) -> CoefficientExpr:
    """div X = sum_i d a_i / d x_i."""
    out = CoefficientExpr.zero(field.n)
    for i, a in enumerate(field.coeffs):
        out = out + a.diff(i)
    return out


def apply_field(field: VectorField, u: CoefficientExpr) -> CoefficientExpr:
    """X u = sum_i a_i du/dx_i."""
    if u.n != field.n:
        raise ValueError(f"dimension mismatch: field {field.n}, expression {u.n}")
    out = CoefficientExpr.zero(field.n)
    for i, a in enumerate(field.coeffs):
        du = u.diff(i)
        if not du.is_zero and not a.is_zero:
            out = out + a * du
    return out


@dataclass(frozen=True)
class VectorFieldSystem:
    n: int
    fields: tuple[VectorField, ...]
    tag: str = "custom"
    params: tuple[tuple[str, object], ...] = ()
    divergences: tuple[CoefficientExpr, ...] = field(init=False, repr=False)

    def __post_init__(self):
        for f in self.fields:
            if f.n != self.n:
                raise ValueError(f"field of dimension {f.n} in a system of dimension {self.n}")
        object.__setattr__(self, "divergences", tuple(divergence(f) for f in self.fields))

    @property
    def m(self) -> int:
        return len(self.fields)

    @property
    def all_constant(self) -> bool:
        return all(a.is_constant for f in self.fields for a in f.coeffs)

    @property
    def coefficients_bounded(self) -> bool:
        return all(a.bounded for f in self.fields for a in f.coeffs)

    @property
    def derivatives_bounded(self) -> bool:
        return all(a.diff(i).bounded for f in self.fields for a in f.coeffs for i in range(self.n))

    @property
    def has_trig(self) -> bool:
        return any(a.has_trig for f in self.fields for a in f.coeffs)

    def second_order(self) -> list[list[CoefficientExpr]]:
        """A_ij = sum_k a_ki a_kj."""
        n = self.n
        A = [[CoefficientExpr.zero(n) for _ in range(n)] for _ in range(n)]
        for f in self.fields:
            for i in range(n):
                for j in range(n):
                    if not (f.coeffs[i].is_zero or f.coeffs[j].is_zero):
                        A[i][j] = A[i][j] + f.coeffs[i] * f.coeffs[j]
        return A

    def first_order(self) -> list[CoefficientExpr]:
        """b_j = sum_k (X_k a_kj + div X_k * a_kj)."""
        n = self.n
        b = [CoefficientExpr.zero(n) for _ in range(n)]
        for f, dv in zip(self.fields, self.divergences):
            for j in range(n):
                b[j] = b[j] + apply_field(f, f.coeffs[j]) + dv * f.coeffs[j]
        return b

    def is_radial(self) -> bool:
        """Constant coefficients with sum_k a_k a_k^T a multiple of the identity."""
        if not self.all_constant:
            return False
        A = np.array([[a.constant_value() for a in row] for row in self.second_order()])
        return bool(np.allclose(A, A[0, 0] * np.eye(self.n), rtol=0, atol=1e-14))

    def describe(self) -> str:
        lines = [f"{self.tag} system on R^{self.n} with {self.m} fields"]
        for k, f in enumerate(self.fields):
            parts = [f"({a!r}) d{i + 1}" for i, a in enumerate(f.coeffs) if not a.is_zero]
            lines.append(f"  X{k + 1} = " + (" + ".join(parts) if parts else "0"))
        return "\n".join(lines)


def delta_x_symbolic(system: VectorFieldSystem, u: CoefficientExpr) -> CoefficientExpr:
    """Delta_X u = sum_k (X_k^2 u + div X_k * X_k u)."""
    if u.n != system.n:
        raise ValueError(f"dimension mismatch: system {system.n}, expression {u.n}")
    out = CoefficientExpr.zero(system.n)
    for f, dv in zip(system.fields, system.divergences):
        xu = apply_field(f, u)
        out = out + apply_field(f, xu)
        if not dv.is_zero:
            out = out + dv * xu
    return out


def carre_du_champ(system: VectorFieldSystem, u: CoefficientExpr) -> CoefficientExpr:
    """sum_k (X_k u)^2, the coefficient of Phi'' in Delta_X Phi(u)."""
    out = CoefficientExpr.zero(system.n)
    for f in system.fields:
        xu = apply_field(f, u)
        out = out + xu * xu
    return out


def _trig_bounded(n: int) -> tuple[VectorField, ...]:
    # X_k acts along d_k with a coefficient depending on a neighbouring coordinate:
    # odd k use sin(x_{k+1}) (wrapping), even k use cos(x_{k-1}).
    fields = []
    for k in range(n):
        coeffs = [CoefficientExpr.zero(n) for _ in range(n)]
        if k % 2 == 0:
            coeffs[k] = CoefficientExpr.sin(n, (k + 1) % n)
        else:
            coeffs[k] = CoefficientExpr.cos(n, k - 1)
        fields.append(VectorField(tuple(coeffs)))
    return tuple(fields)


def builtin_system(
    tag: str,
    n: int | None = None,
    k: int = 1,
    matrix: Sequence[Sequence[float]] | None = None,
) -> VectorFieldSystem:
    """Return one of the named systems.

    ``constant`` needs ``matrix`` with rows a_{k,.}; ``grushin`` is always
    planar; ``engel`` needs ``n >= 2``.
    """
    if tag == "euclidean":
        if n is None or n < 1:
            raise ValueError("euclidean system needs n >= 1")
        fields = tuple(
            VectorField(tuple(CoefficientExpr.constant(n, int(i == j)) for j in range(n)))
            for i in range(n)
        )
        return VectorFieldSystem(n, fields, tag, (("n", n),))
    if tag == "constant":
        if matrix is None:
            raise ValueError("constant system needs a coefficient matrix")
        rows = [list(r) for r in matrix]
        width = {len(r) for r in rows}
        if len(width) != 1:
            raise ValueError("coefficient matrix rows must have equal length")
        dim = width.pop()
        if n is not None and n != dim:
            raise ValueError(f"dimension mismatch: n={n} but matrix has {dim} columns")
        fields = tuple(
            VectorField(tuple(CoefficientExpr.constant(dim, c) for c in r)) for r in rows
        )
        return VectorFieldSystem(dim, fields, tag, (("matrix", tuple(map(tuple, rows))),))
    if tag == "trig-bounded":
        n = 2 if n is None else n
        if n < 2:
            raise ValueError("trig-bounded system needs n >= 2")
        return VectorFieldSystem(n, _trig_bounded(n), tag, (("n", n),))
    if tag == "grushin":
        if n is not None and n != 2:
            raise ValueError("grushin system lives on R^2")
        if k < 1:
            raise ValueError("grushin order k must be >= 1")
        x1k = CoefficientExpr.variable(2, 0, k)
        fields = (
            VectorField((CoefficientExpr.constant(2, 1), CoefficientExpr.zero(2))),
            VectorField((CoefficientExpr.zero(2), x1k)),
        )
        return VectorFieldSystem(2, fields, tag, (("k", k),))
    if tag == "engel":
        if n is None or n < 2:
            raise ValueError("engel system needs n >= 2")
        X1 = VectorField(tuple(CoefficientExpr.constant(n, int(j == 0)) for j in range(n)))
        X2 = VectorField(
            tuple(
                CoefficientExpr.zero(n) if j == 0 else CoefficientExpr.variable(n, 0, j)
                for j in range(n)
            )
        )
        return VectorFieldSystem(n, (X1, X2), tag, (("n", n),))
    raise ValueError(f"unknown system tag {tag!r}; expected one of {SYSTEM_TAGS}")


def _expr_from_table(n: int, terms: Sequence[Mapping]) -> CoefficientExpr:
    z = [0] * n
    return CoefficientExpr.from_terms(
        n,
        [
            (
                (tuple(t.get("pow", z)), tuple(t.get("sin", z)), tuple(t.get("cos", z))),
                t.get("c", 1),
            )
            for t in terms
        ],
    )


def system_from_table(table: Sequence[Sequence[Sequence[Mapping]]], tag: str = "custom") -> VectorFieldSystem:
    """Build a system from ``table[k][i]`` = list of terms of a_{k,i}.

    Each term is a mapping with keys ``c``, ``pow``, ``sin``, ``cos``
    (missing keys default to 1 and zero vectors).
    """
    if not table:
        raise ValueError("empty coefficient table")
    n = len(table[0])
    fields = []
    for row in table:
        if len(row) != n:
            raise ValueError("every field needs one term list per coordinate")
        fields.append(VectorField(tuple(_expr_from_table(n, terms) for terms in row)))
    return VectorFieldSystem(n, tuple(fields), tag)
