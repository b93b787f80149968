"""Cutoff profiles: the C^2 plateau-to-zero step and the interior time bump."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exponents import as_rational, conjugate

__all__ = [
    "CutoffProfile",
    "TimeBump",
    "ProfileRejected",
    "IntegrabilityReport",
    "endpoint_exponent",
    "minimal_kappa",
    "auto_kappa",
    "integrability_check",
    "profile_eval",
]


class ProfileRejected(ValueError):
    def __init__(self, message: str, suggested_kappa: int):
        super().__init__(message)
        self.suggested_kappa = suggested_kappa


@dataclass(frozen=True)
class CutoffProfile:
    """Phi = 1 on [0,1], c * int_z^2 (s-1)^2 (2-s)^kappa ds on [1,2], 0 beyond.

    With ``shifted`` the transition sits on [0,1] instead (Phi(z+1)), the
    variant used by the logarithmic family.
    """

    kappa: float = 8
    shifted: bool = False

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @property
    def norm(self) -> float:
        k = self.kappa
        return 1.0 / (1 / (k + 1) - 2 / (k + 2) + 1 / (k + 3))

    @property
    def transition(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.shifted else (1.0, 2.0)

    def _v(self, z):
        # distance to the outer end of the transition, clipped to [0, 1]
        z = np.asarray(z, dtype=float)
        zz = z + 1.0 if self.shifted else z
        return np.clip(2.0 - zz, 0.0, 1.0), zz

    def __call__(self, z):
        return self.evaluate(z)

    def evaluate(self, z):
        """(Phi, Phi', Phi'') at z, elementwise."""
        v, zz = self._v(z)
        k, c = self.kappa, self.norm
        with np.errstate(divide="ignore", invalid="ignore"):
            bracket = 1 / (k + 1) - 2 * v / (k + 2) + v * v / (k + 3)
            phi = c * v ** (k + 1) * bracket
            d1 = -c * (1 - v) ** 2 * v**k
            # w'(s) = (1-v) [2 v^k - k (1-v) v^(k-1)] with s = 2 - v
            tail = k * (1 - v) * v ** (k - 1) if k > 0 else 0.0
            d2 = -c * (1 - v) * (2 * v**k - tail)
        inside = (zz > 1.0) & (zz < 2.0)
        phi = np.where(zz <= 1.0, 1.0, np.where(inside, phi, 0.0))
        d1 = np.where(inside, d1, 0.0)
        d2 = np.where(inside, d2, 0.0)
        return phi, d1, d2

    def log_value(self, z):
        """log Phi, finite wherever Phi > 0 (no cancellation near the outer end)."""
        v, zz = self._v(z)
        k = self.kappa
        with np.errstate(divide="ignore"):
            bracket = 1 / (k + 1) - 2 * v / (k + 2) + v * v / (k + 3)
            out = math.log(self.norm) + (k + 1) * np.log(v) + np.log(bracket)
        return np.where(zz <= 1.0, 0.0, np.where(zz < 2.0, out, -np.inf))

    def integral(self) -> float:
        """int over the transition of Phi."""
        lo, hi = self.transition
        return integrate.quad(lambda z: float(self.evaluate(z)[0]), lo, hi, epsabs=0, epsrel=1e-13)[0]


def profile_eval(profile: CutoffProfile, z):
    return profile.evaluate(z)


@dataclass(frozen=True)
class TimeBump:
    """exp(4 - 1/(t(1-t))) on (0,1), zero elsewhere; peak value 1 at t = 1/2."""

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        ts = np.where(inside, t, 0.5)
        q = ts * (1 - ts)
        val = np.exp(4 - 1 / q)
        der = val * (1 - 2 * ts) / q**2
        return np.where(inside, val, 0.0), np.where(inside, der, 0.0)

    def __call__(self, t):
        return self.evaluate(t)

    def log_value(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        ts = np.where(inside, t, 0.5)
        return np.where(inside, 4 - 1 / (ts * (1 - ts)), -np.inf)


def endpoint_exponent(kappa: float, p: float) -> float:
    """Power of v = 2 - z in |Phi''|^p' Phi^(-1/(p-1)) as v -> 0.

    Phi ~ v^(kappa+1), Phi'' ~ v^(kappa-1), so the power is
    (kappa-1) p' - (kappa+1)(p'-1) = kappa + 1 - 2 p'.
    """
    pc = p / (p - 1)
    return (kappa - 1) * pc - (kappa + 1) * (pc - 1)


def minimal_kappa(p: float) -> int:
    """Smallest integer kappa with endpoint exponent > -1 (exact arithmetic on p)."""
    pc = conjugate(p)
    return max(0, math.floor(2 * pc - 2) + 1)


def auto_kappa(p: float, floor: int = 8) -> int:
    """kappa leaving an endpoint exponent of at least 2, so panel Gauss stays accurate."""
    return max(floor, math.ceil(2 * conjugate(p) + 1))


@dataclass
class IntegrabilityReport:
    kappa: float
    p: float
    exponent: float
    finite: bool
    value: float
    minimal_kappa: int
    time_value: float


def _quotient_integrand(profile: CutoffProfile, p: float, weight=None):
    pc = p / (p - 1)

    def f(z):
        phi, d1, d2 = profile.evaluate(z)
        num = abs(float(d1)) + abs(float(d2))
        if num == 0.0:
            return 0.0
        lg = pc * math.log(num) - float(profile.log_value(z)) / (p - 1)
        w = 1.0 if weight is None else weight(z)
        return w * math.exp(lg)

    return f


def integrability_check(profile: CutoffProfile, p: float, n: int = 1, kind: str = "parabolic") -> IntegrabilityReport:
    """Finiteness of int |(|Phi'| + |Phi''|)^p / Phi|^(1/(p-1)) over the transition.

    The verdict comes from the endpoint exponent; the value from adaptive
    quadrature.  For the logarithmic family the radial weight e^((n-2) z)
    (r^(n-2) after the log substitution, up to constants) is included.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    expo = endpoint_exponent(profile.kappa, p)
    kmin = minimal_kappa(p)
    # decide on exact rationals; 2p' - 2 is often an integer that floats miss by an ulp
    finite = as_rational(profile.kappa) + 1 - 2 * conjugate(p) > -1
    weight = (lambda z: math.exp((n - 2) * z)) if kind == "critical-log" else None
    lo, hi = profile.transition
    if not finite:
        raise ProfileRejected(
            f"kappa={profile.kappa} gives endpoint exponent {expo:.4g} <= -1 at p={p}; "
            f"need kappa >= {kmin}",
            suggested_kappa=kmin,
        )
    value = integrate.quad(_quotient_integrand(profile, p, weight), lo, hi, limit=200, epsrel=1e-10)[0]
    bump = TimeBump()
    pc = p / (p - 1)

    def g(t):
        val, der = bump.evaluate(t)
        if val == 0.0:
            return 0.0
        return math.exp(pc * math.log(abs(float(der)) + 1e-300) + float(bump.log_value(t)) * (1 - pc))

    time_value = integrate.quad(g, 0.0, 1.0, limit=200)[0]
    return IntegrabilityReport(profile.kappa, p, expo, finite, value, kmin, time_value)
