"""Quadrature rules aligned with the level sets of d(y) = sum y_i^e_i.

The rules live in the scaled coordinates y; callers map nodes through the
dilation x = D y and multiply weights by det D.  Every panel boundary where
the region changes shape (d = 1, d = lo, d = hi along each fibre) is a
breakpoint, so the nested Gauss rule only ever integrates smooth pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

__all__ = ["NodeSet", "level_set_rule", "radial_rule", "shell_qmc_rule", "interval_rule", "tree_sum"]

GAUSS_ORDER = 16


@dataclass
class NodeSet:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return tree_sum(self.weights * values)

    def __len__(self) -> int:
        return len(self.weights)


def tree_sum(a: np.ndarray) -> float:
    """Pairwise summation in a fixed order (numpy's own sum is pairwise per block)."""
    a = np.asarray(a, dtype=float).ravel()
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0]) if a.size else 0.0


def interval_rule(breaks: np.ndarray, panels: int = 1, order: int = GAUSS_ORDER):
    """Gauss nodes/weights over consecutive intervals of each row of ``breaks``.

    ``breaks`` has shape (m, K); rows must be nondecreasing.  Returns arrays of
    shape (m, (K-1)*panels*order).
    """
    xi, wi = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:, :-1], breaks[:, 1:]
    frac = np.linspace(0.0, 1.0, panels + 1)
    pa = a[:, :, None] + (b - a)[:, :, None] * frac[None, None, :-1]
    pb = a[:, :, None] + (b - a)[:, :, None] * frac[None, None, 1:]
    half = (pb - pa) / 2
    mid = (pb + pa) / 2
    nodes = mid[..., None] + half[..., None] * xi
    weights = half[..., None] * wi
    m = breaks.shape[0]
    return nodes.reshape(m, -1), weights.reshape(m, -1)


def level_set_rule(
    exponents: tuple[int, ...],
    lo: float,
    hi: float,
    panels: int = 1,
    order: int = GAUSS_ORDER,
    extra_breaks: tuple[float, ...] = (1.0,),
) -> NodeSet:
    """Nested Gauss rule for {y : lo <= sum y_i^e_i <= hi}, all e_i even.

    Coordinates are integrated one at a time over y_i >= 0 and mirrored, so
    each fibre is a union of symmetric intervals.  Breakpoints in the
    variable a = y_i^e_i sit at lo - S, hi - S and at every level in
    ``extra_breaks`` minus S, where S is the partial sum of earlier terms.
    """
    n = len(exponents)
    levels = sorted({lo, hi, *[c for c in extra_breaks if lo < c < hi]})
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    S = np.zeros(1)
    for i, e in enumerate(exponents):
        last = i == n - 1
        room = hi - S
        cand = [np.zeros_like(S)]
        for c in levels:
            cand.append(np.clip(c - S, 0.0, room))
        cand.append(room)
        a_breaks = np.sort(np.stack(cand, axis=1), axis=1)
        if last:
            start = np.clip(lo - S, 0.0, room)
            a_breaks = np.maximum(a_breaks, start[:, None])
        y_breaks = np.power(np.clip(a_breaks, 0.0, None), 1.0 / e)
        nodes, weights = interval_rule(y_breaks, panels, order)
        keep = weights > 0
        # mirror to y_i < 0
        rows = np.repeat(np.arange(len(S)), keep.sum(axis=1))
        yn = nodes[keep]
        wn = weights[keep]
        rows = np.concatenate([rows, rows])
        yn = np.concatenate([yn, -yn])
        wn = np.concatenate([wn, wn])
        pts = np.concatenate([pts[rows], yn[:, None]], axis=1)
        S = S[rows] + np.abs(yn) ** e
        wts = wts[rows] * wn
    return NodeSet(pts, wts)


def radial_rule(lo: float, hi: float, breaks=(), panels: int = 1, order: int = GAUSS_ORDER) -> NodeSet:
    """1-D Gauss rule on [lo, hi] with extra breakpoints."""
    inner = sorted(b for b in breaks if lo < b < hi)
    edges = np.array([[lo, *inner, hi]])
    nodes, weights = interval_rule(edges, panels, order)
    return NodeSet(nodes[0][:, None], weights[0])


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def shell_qmc_rule(n: int, lo: float, hi: float, log2_points: int = 16, seed: int = 0) -> NodeSet:
    """Scrambled Sobol points, volume-uniform in the shell lo <= |y|^2 <= hi.

    Used for oscillatory coefficients, where a tensor Gauss rule would need
    to resolve every period.  Weights are equal: shell volume / count.
    """
    sob = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    u = sob.random_base2(log2_points)
    r_lo, r_hi = math.sqrt(lo) ** n, math.sqrt(hi) ** n
    r = (r_lo + u[:, 0] * (r_hi - r_lo)) ** (1.0 / n)
    g = _normal.ppf(np.clip(u[:, 1:], 1e-16, 1 - 1e-16))
    direction = g / np.linalg.norm(g, axis=1, keepdims=True)
    vol = sphere_area(n) / n * (r_hi - r_lo)
    return NodeSet(r[:, None] * direction, np.full(len(r), vol / len(r)))
