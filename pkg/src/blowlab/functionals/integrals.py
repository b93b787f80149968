"""Nonexistence functionals I_Delta, I_t and F of a test-function family.

Because psi = tau(t) Phi(P(x)) and p' - 1/(p-1) = 1, each functional splits
exactly into a time integral times a space integral:

    I_Delta = int tau dt            * int Phi^(-1/(p-1)) |Delta_X Phi(P)|^p' dx
    I_t     = int |tau'|^p' tau^(1-p') dt * int Phi(P) dx
    F       = int tau dt            * int f Phi(P) dx

Space integrals are computed in scaled coordinates y = D^-1 x on a rule
fixed once per family shape, so only the integrand depends on T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .families import TestFunctionFamily
from .profiles import CutoffProfile, TimeBump
from .quadrature import NodeSet, level_set_rule, radial_rule, shell_qmc_rule, sphere_area

__all__ = [
    "QuadratureNonconvergence",
    "FunctionalValues",
    "functional_integrals",
    "time_integrals",
    "space_integrals",
]

QMC_TOL = 1e-2


class QuadratureNonconvergence(RuntimeError):
    pass


@dataclass
class FunctionalValues:
    I_delta: float
    I_t: float
    F: float
    time_mass: float
    time_quotient: float
    space_delta: float
    space_mass: float
    space_forcing: float
    method: str
    rel_error: float
    diagnostics: list[str] = field(default_factory=list)


@lru_cache(maxsize=64)
def _unit_time_integrals(kind: str, kappa: float, p: float) -> tuple[float, float]:
    """int tau_1 du and int |tau_1'|^p' tau_1^(1-p') du for the T = 1 time factor."""
    pc = p / (p - 1)
    if kind in ("grushin", "engel"):
        bump = TimeBump()

        def mass(u):
            return float(bump.evaluate(u)[0])

        def quot(u):
            val, der = bump.evaluate(u)
            if val == 0 or der == 0:
                return 0.0
            return math.exp(pc * math.log(abs(float(der))) + (1 - pc) * float(bump.log_value(u)))

        m = integrate.quad(mass, 0, 1, epsabs=0, epsrel=1e-12, limit=200)[0]
        q = integrate.quad(quot, 0, 1, epsabs=0, epsrel=1e-10, limit=200, points=[0.5])[0]
        return m, q
    prof = CutoffProfile(kappa)
    # parabolic: Phi(2u) on [0,1]; critical-log: Phi(u) on [0,2]
    a = 2.0 if kind == "parabolic" else 1.0

    def quot_z(z):
        phi, d1, _ = prof.evaluate(z)
        if d1 == 0:
            return 0.0
        return math.exp(pc * math.log(abs(float(d1))) + (1 - pc) * float(prof.log_value(z)))

    trans = prof.integral()
    m = (1.0 + trans) / a
    q = a ** (pc - 1) * integrate.quad(quot_z, 1, 2, epsabs=0, epsrel=1e-10, limit=200)[0]
    return m, q


def time_integrals(family: TestFunctionFamily) -> tuple[float, float]:
    m, q = _unit_time_integrals(family.kind, float(family.kappa), float(family.p))
    T = family.T
    return T * m, T ** (1 - family.conjugate) * q


def _quotient(family: TestFunctionFamily, x: np.ndarray) -> np.ndarray:
    phi, lap, logphi = family.space_factor(x)
    out = np.zeros(len(x))
    ok = (lap != 0) & np.isfinite(logphi)
    pc = family.conjugate
    out[ok] = np.exp(pc * np.log(np.abs(lap[ok])) - logphi[ok] / (family.p - 1))
    return out


@lru_cache(maxsize=32)
def _level_rule(exponents, lo, hi, panels, extra):
    return level_set_rule(exponents, lo, hi, panels=panels, extra_breaks=extra)


def _radial_nodes(family: TestFunctionFamily, lo: float, hi: float, panels: int, breaks=()):
    """Points on the first axis and radial weights |S^(n-1)| r^(n-1) dr in x units."""
    n = family.n
    rule = radial_rule(lo, hi, breaks, panels)
    r = rule.points[:, 0]
    x = np.zeros((len(r), n))
    x[:, 0] = r
    return x, rule.weights * sphere_area(n) * r ** (n - 1)


def _log_nodes(family: TestFunctionFamily, panels: int, lo=0.0, hi=1.0):
    """Radial nodes in the log variable s with r = exp(L (1 + s))."""
    n = family.n
    L = family.log_radius
    rule = radial_rule(lo, hi, (), panels)
    s = rule.points[:, 0]
    r = np.exp(L * (1 + s))
    x = np.zeros((len(r), n))
    x[:, 0] = r
    return x, rule.weights * sphere_area(n) * r**n * L


def _space_delta(family: TestFunctionFamily, panels: int, seed: int) -> tuple[float, str]:
    kind = family.kind
    if kind == "critical-log":
        x, w = _log_nodes(family, panels)
        return float(np.dot(w, _quotient(family, x))), "radial-log"
    if kind == "parabolic" and family.system.is_radial():
        sT = math.sqrt(family.T)
        x, w = _radial_nodes(family, sT, sT * math.sqrt(2), panels)
        return float(np.dot(w, _quotient(family, x))), "radial"
    if kind == "parabolic" and family.system.has_trig:
        rule = shell_qmc_rule(family.n, 1.0, 2.0, log2_points=15 + panels, seed=seed)
        D = family.dilation
        return float(np.prod(D)) * rule.integrate(_quotient(family, rule.points * D)), "qmc"
    rule = _level_rule(family.exponents, 1.0, 2.0, panels, (1.0,))
    D = family.dilation
    return float(np.prod(D)) * rule.integrate(_quotient(family, rule.points * D)), "level-set"


def _space_mass(family: TestFunctionFamily, panels: int) -> float:
    prof = family.profile
    if family.kind == "critical-log":
        n = family.n
        sR = math.exp(family.log_radius)
        x, w = _log_nodes(family, panels)
        inner = sphere_area(n) / n * sR**n
        return inner + float(np.dot(w, family.space_factor(x)[0]))
    if family.kind == "parabolic":
        # Phi(|x|^2/T) is radial whatever the vector fields are
        sT = math.sqrt(family.T)
        x, w = _radial_nodes(family, 0.0, sT * math.sqrt(2), panels, breaks=(sT,))
        return float(np.dot(w, prof.evaluate(np.sum(x * x, axis=1) / family.T)[0]))
    rule = _level_rule(family.exponents, 0.0, 2.0, panels, (1.0,))
    D = family.dilation
    return float(np.prod(D)) * rule.integrate(family.space_factor(rule.points * D)[0])


def _space_forcing(family: TestFunctionFamily, forcing, panels: int) -> float:
    if forcing is None:
        return 0.0
    if family.kind in ("parabolic", "critical-log") and getattr(forcing, "radial", False):
        n = family.n
        if family.kind == "parabolic":
            outer = math.sqrt(2 * family.T)
            breaks = (math.sqrt(family.T), *forcing.radial_breaks)
        else:
            outer = math.exp(2 * family.log_radius)
            breaks = (math.exp(family.log_radius), *forcing.radial_breaks)
        rule = radial_rule(0.0, outer, breaks, panels * 4)
        r = rule.points[:, 0]
        x = np.zeros((len(r), n))
        x[:, 0] = r
        w = rule.weights * sphere_area(n) * r ** (n - 1)
        return float(np.dot(w, forcing(x) * family.space_factor(x)[0]))
    rule = _level_rule(family.exponents, 0.0, 2.0, panels * 2, (1.0, 1e-6, 1e-4, 1e-2))
    D = family.dilation
    x = rule.points * D
    return float(np.prod(D)) * rule.integrate(forcing(x) * family.space_factor(x)[0])


def space_integrals(family: TestFunctionFamily, forcing=None, panels: int = 1, seed: int = 0):
    sd, method = _space_delta(family, panels, seed)
    return sd, _space_mass(family, panels), _space_forcing(family, forcing, panels), method


def functional_integrals(
    family: TestFunctionFamily,
    p: float | None = None,
    forcing=None,
    panels: int | None = None,
    rtol: float = 1e-6,
    strict: bool = True,
    seed: int = 0,
) -> FunctionalValues:
    """I_Delta, I_t and F with a panel-doubling convergence check.

    ``p`` defaults to the family's exponent; passing a different value is an
    error because the profile's kappa was chosen for the family's p.  The
    default panel count is 4 for rules of dimension at most 2 (|Delta_X psi|^p'
    has interior kinks where Delta_X psi changes sign) and 1 in 3-D and up,
    where the tensor rule is already fine and cost grows cubically.
    """
    if panels is None:
        radial = family.kind == "critical-log" or (family.kind == "parabolic" and family.system.is_radial())
        panels = 4 if radial or family.n <= 2 else 1
    if p is not None and float(p) != family.p:
        raise ValueError("p differs from the family's exponent")
    tm, tq = time_integrals(family)
    sd, sm, sf, method = space_integrals(family, forcing, panels, seed)
    sd2, sm2, sf2, _ = space_integrals(family, forcing, 2 * panels, seed + 1)
    errs = [abs(a - b) / max(abs(b), 1e-300) for a, b in ((sd, sd2), (sm, sm2), (sf, sf2)) if b != 0]
    rel = max(errs) if errs else 0.0
    tol = QMC_TOL if method == "qmc" else rtol
    diagnostics = []
    if rel > tol:
        msg = f"{method} quadrature: panel-doubling disagreement {rel:.3e} exceeds {tol:.1e}"
        if strict:
            raise QuadratureNonconvergence(msg)
        diagnostics.append(msg)
    if method == "qmc":
        diagnostics.append(f"oscillatory coefficients: QMC estimate, seed spread {rel:.2e}")
    return FunctionalValues(
        I_delta=tm * sd2,
        I_t=tq * sm2,
        F=tm * sf2,
        time_mass=tm,
        time_quotient=tq,
        space_delta=sd2,
        space_mass=sm2,
        space_forcing=sf2,
        method=method,
        rel_error=rel,
        diagnostics=diagnostics,
    )
