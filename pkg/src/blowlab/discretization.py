"""Tensor grids on truncated boxes and the finite-difference Delta_X.

Nodes are interior points of ``prod_i [-L_i, L_i]``; values outside the box
are taken to be zero (homogeneous Dirichlet).  Node ordering is row-major
(C order) over the per-axis indices, so node ``(j_1, ..., j_n)`` has flat
index ``sum_i j_i * prod_{l>i} N_l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .fields import CoefficientExpr, VectorFieldSystem, delta_x_symbolic

__all__ = [
    "Grid",
    "GridFunction",
    "SparseOperator",
    "ConvergenceResult",
    "sample",
    "assemble_operator",
    "zero_operator",
    "convergence_order",
    "export_coo",
    "refine",
]


@dataclass(frozen=True)
class Grid:
    half_widths: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        hw = tuple(float(v) for v in self.half_widths)
        pts = tuple(int(v) for v in self.points)
        if len(hw) != len(pts) or not hw:
            raise ValueError("half_widths and points must be non-empty and of equal length")
        if min(pts) < 3:
            raise ValueError("every axis needs at least 3 interior points")
        if min(hw) <= 0:
            raise ValueError("half widths must be positive")
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, n: int, half_width: float, points: int) -> "Grid":
        return cls((half_width,) * n, (points,) * n)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2 * L / (N + 1) for L, N in zip(self.half_widths, self.points))

    @property
    def weight(self) -> float:
        """Volume of one cell, the quadrature weight of every node."""
        return math.prod(self.spacing)

    def axes(self) -> list[np.ndarray]:
        return [-L + (np.arange(N) + 1) * h for L, N, h in zip(self.half_widths, self.points, self.spacing)]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``, row-major."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def multi_index(self) -> np.ndarray:
        return np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=-1)

    def strides(self) -> tuple[int, ...]:
        out, acc = [], 1
        for N in reversed(self.points):
            out.append(acc)
            acc *= N
        return tuple(reversed(out))

    def node_index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def nearest_node(self, x: Sequence[float]) -> int:
        idx = []
        for xi, L, N, h in zip(x, self.half_widths, self.points, self.spacing):
            idx.append(int(np.clip(round((xi + L) / h - 1), 0, N - 1)))
        return self.node_index(idx)

    def boundary_mask(self) -> np.ndarray:
        """Nodes adjacent to the exterior (some index at 0 or N-1)."""
        mi = self.multi_index()
        return np.any((mi == 0) | (mi == np.array(self.points) - 1), axis=1)

    def stencil_interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def as_dict(self) -> dict:
        return {"half_width": list(self.half_widths), "points": list(self.points)}


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.grid.size:
            raise ValueError(f"{self.values.size} values for a grid of {self.grid.size} nodes")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def lq_norm(self, q: float) -> float:
        if math.isinf(q):
            return self.sup_norm()
        return float((np.sum(np.abs(self.values) ** q) * self.grid.weight) ** (1.0 / q))

    def boundary_sup(self) -> float:
        return float(np.max(np.abs(self.values[self.grid.boundary_mask()])))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def sample(expr: CoefficientExpr | Callable[[np.ndarray], np.ndarray] | float, grid: Grid) -> GridFunction:
    """Pointwise evaluation at the interior nodes."""
    if isinstance(expr, CoefficientExpr):
        if expr.n != grid.n:
            raise ValueError(f"expression dimension {expr.n} does not match grid dimension {grid.n}")
        vals = expr(grid.coords())
    elif callable(expr):
        vals = np.broadcast_to(np.asarray(expr(grid.coords()), dtype=float), (grid.size,))
    else:
        vals = np.full(grid.size, float(expr))
    return GridFunction(grid, np.array(vals, dtype=float))


@dataclass
class SparseOperator:
    matrix: sp.csr_matrix
    grid: Grid
    symmetric: bool
    spectral_bound: float
    label: str = ""
    _id: int = field(default=0, repr=False)

    _counter = 0

    def __post_init__(self):
        SparseOperator._counter += 1
        self._id = SparseOperator._counter

    @property
    def key(self) -> int:
        """Stable identity used by propagator caches."""
        return self._id

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: GridFunction | np.ndarray) -> GridFunction | np.ndarray:
        if isinstance(v, GridFunction):
            return GridFunction(self.grid, self.matrix @ v.values)
        return self.matrix @ v

    @property
    def is_zero(self) -> bool:
        return self.matrix.nnz == 0


def _finish(M: sp.spmatrix, grid: Grid, label: str) -> SparseOperator:
    M = sp.csr_matrix(M)
    M.eliminate_zeros()
    M.sort_indices()
    amax = abs(M).max() if M.nnz else 0.0
    asym = abs(M - M.T).max() if M.nnz else 0.0
    symmetric = bool(asym <= 1e-12 * amax) if amax else True
    # Gershgorin bound on the largest-magnitude eigenvalue
    bound = float(np.max(np.asarray(abs(M).sum(axis=1)).ravel())) if M.nnz else 0.0
    return SparseOperator(M, grid, symmetric, bound, label)


def zero_operator(grid: Grid) -> SparseOperator:
    """The operator of the zero-diffusion (pure reaction ODE) mode."""
    return _finish(sp.csr_matrix((grid.size, grid.size)), grid, "zero")


def assemble_operator(system: VectorFieldSystem, grid: Grid) -> SparseOperator:
    """Second-order central differences for the expanded Delta_X.

    Delta_X u = sum_ij A_ij d_i d_j u + sum_j b_j d_j u with coefficients
    frozen at the stencil centre; exterior values are zero.
    """
    if system.n != grid.n:
        raise ValueError(f"system dimension {system.n} does not match grid dimension {grid.n}")
    n, size = grid.n, grid.size
    x = grid.coords()
    mi = grid.multi_index()
    stride = grid.strides()
    h = grid.spacing
    N = np.array(grid.points)
    A = system.second_order()
    b = system.first_order()
    rows_all = np.arange(size)
    rows, cols, vals = [], [], []

    def add(valid, offset, coef):
        if np.isscalar(coef):
            coef = np.full(size, coef)
        sel = valid & (coef != 0)
        rows.append(rows_all[sel])
        cols.append(rows_all[sel] + offset)
        vals.append(coef[sel])

    everywhere = np.ones(size, dtype=bool)
    diag = np.zeros(size)
    for i in range(n):
        aii = A[i][i](x) if not A[i][i].is_zero else np.zeros(size)
        bi = b[i](x) if not b[i].is_zero else np.zeros(size)
        diag -= 2 * aii / h[i] ** 2
        up = mi[:, i] + 1 < N[i]
        dn = mi[:, i] - 1 >= 0
        add(up, stride[i], aii / h[i] ** 2 + bi / (2 * h[i]))
        add(dn, -stride[i], aii / h[i] ** 2 - bi / (2 * h[i]))
    add(everywhere, 0, diag)

    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j].is_zero:
                continue
            # 2 A_ij d_i d_j u with the 4-point cross stencil
            c = 2 * A[i][j](x) / (4 * h[i] * h[j])
            for si in (1, -1):
                for sj in (1, -1):
                    ok_i = (mi[:, i] + si >= 0) & (mi[:, i] + si < N[i])
                    ok_j = (mi[:, j] + sj >= 0) & (mi[:, j] + sj < N[j])
                    add(ok_i & ok_j, si * stride[i] + sj * stride[j], si * sj * c)

    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return _finish(M, grid, system.tag)


def refine(grid: Grid) -> Grid:
    """Same box, spacing halved on every axis."""
    return Grid(grid.half_widths, tuple(2 * N + 1 for N in grid.points))


@dataclass
class ConvergenceResult:
    spacings: list[float]
    errors: list[float]
    order: float | None
    monotone: bool
    indeterminate: bool
    diagnostics: list[str]


def convergence_order(
    system: VectorFieldSystem,
    u: CoefficientExpr,
    grids: Sequence[Grid],
    exact_floor: float = 1e-10,
) -> ConvergenceResult:
    """Empirical order of the interior truncation error on a grid ladder.

    Errors are max-norm over the coarsest grid's nodes whose full stencil is
    interior, read off every level at those same physical points when the
    grids nest (as ``refine`` produces).  A node set that grows with
    refinement finds larger maxima near the edge and biases the slope.
    The order is the least-squares slope of log(error) against log(h).
    """
    if len(grids) < 3:
        raise ValueError("need at least three grids")
    target = delta_x_symbolic(system, u)
    errs, hs = [], []
    probes = grids[0].coords()[grids[0].stencil_interior_mask()]
    for g in grids:
        op = assemble_operator(system, g)
        approx = op.matrix @ sample(u, g).values
        exact = sample(target, g).values
        idx = np.array([g.nearest_node(x) for x in probes])
        if np.allclose(g.coords()[idx], probes, rtol=0, atol=1e-9 * max(g.half_widths)):
            mask = idx
        else:
            mask = g.stencil_interior_mask()
        errs.append(float(np.max(np.abs(approx - exact)[mask])))
        hs.append(max(g.spacing))
    diagnostics = []
    monotone = all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    scale = max(1.0, float(np.max(np.abs(sample(target, grids[-1]).values))))
    if max(errs) <= exact_floor * scale:
        diagnostics.append("stencil exact to round-off; order indeterminate")
        return ConvergenceResult(hs, errs, None, monotone, True, diagnostics)
    if not monotone:
        diagnostics.append("errors not monotonically decreasing under refinement")
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceResult(hs, errs, slope, monotone, False, diagnostics)


def export_coo(op: SparseOperator, path) -> None:
    """Write ``row col value`` lines with 17 significant digits."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="\n") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
