"""Space-time test functions psi(t, x) = tau(t) * Phi(P(x)) and their derivatives.

Polynomial kinds (parabolic, grushin, engel) use P = d / s with d a sum of
even powers, so

    Delta_X Phi(P) = Phi''(P) Gamma(d) / s^2 + Phi'(P) Delta_X d / s,

with Gamma(d) = sum_k (X_k d)^2 and Delta_X d computed symbolically.  The
logarithmic kind uses P = ln(|x| / sqrt R) / ln sqrt R with its explicit
gradient and Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..fields import CoefficientExpr, VectorFieldSystem, carre_du_champ, delta_x_symbolic
from .profiles import CutoffProfile, TimeBump, auto_kappa

__all__ = ["KINDS", "TestFunctionFamily", "make_family", "psi_eval"]

KINDS = ("parabolic", "critical-log", "grushin", "engel")


@dataclass(frozen=True)
class TestFunctionFamily:
    kind: str
    system: VectorFieldSystem
    p: float
    T: float
    R: float | None = None
    kappa: float | None = None
    profile: CutoffProfile = field(init=False)
    time_bump: TimeBump = field(init=False, default_factory=TimeBump)

    # not a pytest class despite the name
    __test__ = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.kind == "critical-log":
            if self.R is None or self.R <= 1:
                raise ValueError("critical-log family needs R > 1")
            if not self.system.is_radial():
                raise ValueError("critical-log family is implemented for rotation-invariant systems only")
        if self.kind == "grushin" and (self.system.tag != "grushin" or self.system.n != 2):
            raise ValueError("grushin family needs the grushin system")
        if self.kind == "engel" and self.system.tag != "engel":
            raise ValueError("engel family needs the engel system")
        kappa = self.kappa if self.kappa is not None else auto_kappa(self.p)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "profile", CutoffProfile(kappa, shifted=self.kind == "critical-log"))

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def conjugate(self) -> float:
        return self.p / (self.p - 1)

    @cached_property
    def grushin_k(self) -> int:
        return int(dict(self.system.params).get("k", 1))

    @cached_property
    def exponents(self) -> tuple[int, ...]:
        """Even powers e_i with d(x) = sum x_i^e_i."""
        n = self.n
        if self.kind == "parabolic":
            return (2,) * n
        if self.kind == "grushin":
            return (2 * self.grushin_k + 2, 2)
        if self.kind == "engel":
            return tuple(2 ** (n - i) for i in range(n))
        return ()

    @cached_property
    def d(self) -> CoefficientExpr | None:
        if self.kind == "critical-log":
            return None
        out = CoefficientExpr.zero(self.n)
        for i, e in enumerate(self.exponents):
            out = out + CoefficientExpr.variable(self.n, i, e)
        return out

    @cached_property
    def scale(self) -> float:
        """s with P = d / s."""
        if self.kind == "parabolic":
            return self.T
        if self.kind == "grushin":
            return self.T ** (self.grushin_k + 1)
        if self.kind == "engel":
            return self.T ** (2 ** (self.n - 1))
        return 1.0

    @cached_property
    def dilation(self) -> np.ndarray:
        """Diagonal D with d(D y) = s d(y): x_i = s^(1/e_i) y_i."""
        if self.kind == "critical-log":
            return np.ones(self.n)
        return np.array([self.scale ** (1.0 / e) for e in self.exponents])

    @cached_property
    def gamma_d(self) -> CoefficientExpr | None:
        return None if self.d is None else carre_du_champ(self.system, self.d)

    @cached_property
    def delta_d(self) -> CoefficientExpr | None:
        return None if self.d is None else delta_x_symbolic(self.system, self.d)

    @property
    def log_radius(self) -> float:
        return 0.5 * math.log(self.R)

    # time factor

    @property
    def time_support(self) -> tuple[float, float]:
        if self.kind == "critical-log":
            return (0.0, 2 * self.T)
        return (0.0, self.T)

    def time_factor(self, t):
        """(tau, tau') at t."""
        t = np.asarray(t, dtype=float)
        T = self.T
        if self.kind == "parabolic":
            phi, d1, _ = CutoffProfile(self.kappa).evaluate(2 * t / T)
            return np.where(t >= 0, phi, 0.0), np.where(t >= 0, 2 * d1 / T, 0.0)
        if self.kind == "critical-log":
            phi, d1, _ = CutoffProfile(self.kappa).evaluate(t / T)
            return np.where(t >= 0, phi, 0.0), np.where(t >= 0, d1 / T, 0.0)
        val, der = self.time_bump.evaluate(t / T)
        return val, der / T

    # space factor

    def argument(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "critical-log":
            r = np.linalg.norm(x, axis=-1)
            L = self.log_radius
            with np.errstate(divide="ignore"):
                return (np.log(r) - L) / L
        return self.d(x) / self.scale

    def space_factor(self, x):
        """(Phi(P), Delta_X Phi(P), log Phi(P)) at points x of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        P = self.argument(x)
        phi, d1, d2 = self.profile.evaluate(P)
        logphi = self.profile.log_value(P)
        active = (d1 != 0) | (d2 != 0)
        lap = np.zeros_like(phi)
        if np.any(active):
            xa = x[active]
            if self.kind == "critical-log":
                g2, lp = self._log_derivatives(xa)
            else:
                s = self.scale
                g2 = self.gamma_d(xa) / s**2
                lp = self.delta_d(xa) / s
            lap[active] = d2[active] * g2 + d1[active] * lp
        return phi, lap, logphi

    def _log_derivatives(self, x):
        """Gamma(P) and Delta_X P for P = (ln|x| - L)/L, from the gradient and Hessian."""
        sysm = self.system
        n = self.n
        L = self.log_radius
        r2 = np.sum(x * x, axis=-1)
        grad = x / (L * r2[:, None])
        hess = (np.eye(n)[None] / r2[:, None, None] - 2 * x[:, :, None] * x[:, None, :] / r2[:, None, None] ** 2) / L
        g2 = np.zeros(len(x))
        for f in sysm.fields:
            coeff = np.stack([a(x) * np.ones(len(x)) for a in f.coeffs], axis=-1)
            g2 += np.sum(coeff * grad, axis=-1) ** 2
        A = sysm.second_order()
        b = sysm.first_order()
        lp = np.zeros(len(x))
        for i in range(n):
            if not b[i].is_zero:
                lp += b[i](x) * grad[:, i]
            for j in range(n):
                if not A[i][j].is_zero:
                    lp += A[i][j](x) * hess[:, i, j]
        return g2, lp

    def space_support(self) -> str:
        lo, hi = self.profile.transition
        return f"{lo} <= P <= {hi}"


def make_family(kind: str, system: VectorFieldSystem, p: float, T: float, R: float | None = None, kappa=None):
    return TestFunctionFamily(kind, system, float(p), float(T), None if R is None else float(R), kappa)


def psi_eval(family: TestFunctionFamily, t, x):
    """(psi, psi_t, Delta_X psi) at times t (broadcast against the points x)."""
    tau, dtau = family.time_factor(t)
    phi, lap, _ = family.space_factor(x)
    return tau * phi, dtau * phi, tau * lap
