"""Weak-form residual of a computed trajectory against a test function.

    R = int int |u|^p psi + int u0 psi(0) + int int f psi
        + int int u psi_t + int int u Delta_X psi,

which vanishes for a weak solution.  Space: collocation at the grid nodes
with the cell volume as weight.  Time: Gauss-Legendre on every mesh
interval, u interpolated linearly between mesh nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mild import ProblemSpec, Trajectory
from .exponents import young_constant
from .families import TestFunctionFamily

__all__ = ["WeakResidual", "weak_form_residual", "young_split_check"]


@dataclass
class WeakResidual:
    residual: float
    reaction: float
    initial: float
    forcing: float
    time_term: float
    space_term: float
    I_delta: float
    I_t: float
    support_inside: bool

    @property
    def scale(self) -> float:
        return max(abs(self.reaction), abs(self.initial), abs(self.forcing), abs(self.time_term), abs(self.space_term))


def _time_rule(family: TestFunctionFamily, mesh_nodes: np.ndarray, order: int):
    lo, hi = family.time_support
    hi = min(hi, mesh_nodes[-1])
    extra = []
    if family.kind == "parabolic":
        extra = [family.T / 2]
    elif family.kind == "critical-log":
        extra = [family.T]
    cuts = np.unique(np.concatenate([mesh_nodes, extra, [lo, hi]]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    xi, wi = np.polynomial.legendre.leggauss(order)
    a, b = cuts[:-1], cuts[1:]
    t = ((a + b)[:, None] + (b - a)[:, None] * xi) / 2
    w = (b - a)[:, None] * wi / 2
    return t.ravel(), w.ravel()


def weak_form_residual(u: Trajectory, family: TestFunctionFamily, spec: ProblemSpec, order: int = 4) -> WeakResidual:
    if family.system.n != spec.grid.n:
        raise ValueError("family and problem dimensions differ")
    grid = spec.grid
    x = grid.coords()
    hw = grid.weight
    phi, lap, logphi = family.space_factor(x)
    # psi must vanish near the box edge for the weak identity to hold without boundary terms
    support_inside = bool(np.all(phi[grid.boundary_mask()] == 0.0))
    mesh_nodes = u.mesh.nodes
    if family.time_support[1] > mesh_nodes[-1] * (1 + 1e-12):
        raise ValueError("trajectory ends before the test function's time support")
    ts, tw = _time_rule(family, mesh_nodes, order)
    tau, dtau = family.time_factor(ts)
    U = u.interpolate(ts)
    p = spec.p
    reaction = hw * float(np.sum(tw * tau * ((np.abs(U) ** p) @ phi)))
    time_term = hw * float(np.sum(tw * dtau * (U @ phi)))
    space_term = hw * float(np.sum(tw * tau * (U @ lap)))
    tau0 = float(family.time_factor(np.array([0.0]))[0][0])
    initial = hw * tau0 * float(spec.u0.values @ phi)
    forcing = hw * float(np.sum(tw * tau)) * float(spec.f.values @ phi)
    # the two test-function functionals on the same discrete rule
    pc = p / (p - 1)
    ok = (lap != 0) & np.isfinite(logphi)
    qd = np.zeros_like(lap)
    qd[ok] = np.exp(pc * np.log(np.abs(lap[ok])) - logphi[ok] / (p - 1))
    I_delta = hw * float(np.sum(tw * tau)) * float(np.sum(qd))
    tq = np.zeros_like(tau)
    pos = (tau > 0) & (dtau != 0)
    tq[pos] = np.exp(pc * np.log(np.abs(dtau[pos])) + (1 - pc) * np.log(tau[pos]))
    I_t = hw * float(np.sum(tw * tq)) * float(np.sum(phi))
    res = reaction + initial + forcing + time_term + space_term
    return WeakResidual(res, reaction, initial, forcing, time_term, space_term, I_delta, I_t, support_inside)


@dataclass
class YoungSplit:
    lhs: float
    rhs: float
    holds: bool
    constant: float


def young_split_check(w: WeakResidual, p: float, rtol: float = 1e-8) -> YoungSplit:
    """F <= Y(p) (I_Delta + I_t) + |R| for nonnegative u0 and psi.

    From the weak identity, |u||psi_t + Delta psi| is split pointwise by
    Young's inequality into |u|^p psi / 2 + Y(p) times the test-function
    quotients; the |u|^p terms cancel against the reaction term.
    """
    Y = young_constant(p)
    lhs = w.forcing + w.initial
    rhs = Y * (w.I_delta + w.I_t) + abs(w.residual)
    return YoungSplit(lhs, rhs, lhs <= rhs * (1 + rtol) + rtol * w.scale, Y)
