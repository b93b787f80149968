"""Closed-form exponents, critical thresholds and the blow-up time bound.

Every function returns an exact ``Fraction`` when its inputs are rational
(ints, Fractions, or decimal strings/floats read digit for digit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "as_rational",
    "conjugate",
    "theoretical_exponent",
    "critical_exponent_lower_bound",
    "young_constant",
    "blowup_upper_bound",
    "ExponentSet",
    "exponent_set",
]


def as_rational(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, int):
        return Fraction(p)
    if isinstance(p, float):
        if not math.isfinite(p):
            raise ValueError("exponent must be finite")
        return Fraction(repr(p))
    return Fraction(str(p))


def conjugate(p) -> Fraction:
    p = as_rational(p)
    if p <= 1:
        raise ValueError("p must exceed 1")
    return p / (p - 1)


def theoretical_exponent(kind: str, n: int, p, k: int = 1) -> Fraction:
    """Power of T in the scaling of I_Delta(T).

    parabolic (bounded coefficients): n/2 + 1 - p'/2
    constant:                         n/2 + 1 - p'
    grushin:                          (k+4)/2 - p'
    engel:                            (2^n - 1)/2 + 1 - p'
    critical-log: the power of ln sqrt(R) in the bound on I_Delta/T, -(n+1)
    """
    pc = conjugate(p)
    half = Fraction(1, 2)
    if kind == "parabolic":
        return n * half + 1 - pc / 2
    if kind == "constant":
        return n * half + 1 - pc
    if kind == "grushin":
        return Fraction(k + 4, 2) - pc
    if kind == "engel":
        return Fraction(2**n - 1, 2) + 1 - pc
    if kind == "critical-log":
        return Fraction(-(n + 1))
    raise ValueError(f"unknown kind {kind!r}")


def critical_exponent_lower_bound(kind: str, n: int, k: int = 1) -> Fraction:
    """Threshold below which no global weak solution exists."""
    if kind == "parabolic":
        if n <= 2:
            raise ValueError("parabolic threshold n/(n-1) needs n > 2")
        return Fraction(n, n - 1)
    if kind == "constant":
        if n <= 2:
            raise ValueError("constant-coefficient threshold n/(n-2) needs n > 2")
        return Fraction(n, n - 2)
    if kind == "grushin":
        if k < 1:
            raise ValueError("grushin order k must be at least 1")
        return Fraction(k + 2, k)
    if kind == "engel":
        if n < 2:
            raise ValueError("engel systems need n >= 2")
        return Fraction(2**n - 1, 2**n - 3)
    raise ValueError(f"unknown kind {kind!r}")


def young_constant(p) -> float:
    """1 / (p' (p/2)^(p'-1)): the weight on the test-function term after
    splitting |u||L psi| <= |u|^p psi / 2 + C |L psi|^p' psi^(1-p')."""
    pf = float(p)
    if pf <= 1:
        raise ValueError("p must exceed 1")
    pc = pf / (pf - 1)
    return 1.0 / (pc * (pf / 2) ** (pc - 1))


def blowup_upper_bound(eps: float, lam: float, p: float, C1: float = 1.0) -> float:
    """(C1 eps)^(-2/(p' - lam)): largest existence time compatible with
    forcing eps |x|^-lam, from T^(p'/2 - lam/2) <= 1/(C1 eps)."""
    pc = p / (p - 1)
    if p <= 1:
        raise ValueError("p must exceed 1")
    if not 0 < lam < pc:
        raise ValueError(f"need 0 < lambda < p/(p-1) = {pc:.6g}")
    if eps <= 0 or C1 <= 0:
        raise ValueError("eps and C1 must be positive")
    return (C1 * eps) ** (-2.0 / (pc - lam))


@dataclass(frozen=True)
class ExponentSet:
    p: Fraction
    conjugate: Fraction
    slopes: dict
    thresholds: dict
    young: float


def exponent_set(n: int, p, k: int = 1) -> ExponentSet:
    slopes = {}
    for kind in ("parabolic", "constant", "grushin", "engel", "critical-log"):
        slopes[kind] = theoretical_exponent(kind, n, p, k)
    thresholds = {}
    for kind in ("parabolic", "constant", "grushin", "engel"):
        try:
            thresholds[kind] = critical_exponent_lower_bound(kind, n, k)
        except ValueError:
            thresholds[kind] = None
    return ExponentSet(as_rational(p), conjugate(p), slopes, thresholds, young_constant(p))
