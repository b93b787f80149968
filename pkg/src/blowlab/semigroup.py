"""Heat semigroup exp(tA) of an assembled operator, its kernel, and checks.

Two evaluation paths:

* dense, for at most ``DENSE_LIMIT`` nodes.  Symmetric operators are
  diagonalised once (``eigh``) so exp(tA) costs one product for any t;
  otherwise ``scipy.linalg.expm`` (scaling and squaring with a Pade
  approximant) is evaluated per distinct t and cached.
* Krylov, above the limit: Arnoldi projection with adaptive substeps and
  the a-posteriori error estimate of Sidje's ``expv``.  Failure to meet the
  tolerance raises :class:`KrylovNonconvergence` carrying the achieved error.

The kernel is normalised against the grid quadrature: ``S(t)w(x) =
sum_y h_t(x, y) w(y) * weight``, so the slice at x is row x of exp(tA)
divided by the cell volume and its mass is ``(exp(tA) 1)(x)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .discretization import GridFunction, SparseOperator

__all__ = [
    "DENSE_LIMIT",
    "KrylovNonconvergence",
    "SemigroupAction",
    "KernelSlice",
    "evolve",
    "kernel_slice",
    "kernel_mass",
    "semigroup_defect",
    "negative_fraction",
    "gaussian_kernel",
    "krylov_expv",
]

DENSE_LIMIT = 4096


class KrylovNonconvergence(RuntimeError):
    def __init__(self, achieved: float, tol: float, t_reached: float, t: float):
        super().__init__(
            f"Krylov exponential action stalled at t={t_reached:.6g} of {t:.6g}: "
            f"error estimate {achieved:.3e} exceeds tolerance {tol:.1e}"
        )
        self.achieved = achieved
        self.tol = tol


def krylov_expv(A, v: np.ndarray, t: float, tol: float = 1e-10, m: int = 30, max_steps: int = 10_000):
    """exp(tA)v by restarted Arnoldi with local error control.

    Follows the time-stepping scheme of Expokit's ``expv``: each substep
    projects onto an m-dimensional Krylov space, exponentiates the augmented
    Hessenberg matrix, and accepts the step when the estimated local error
    per unit time is below ``tol``.  Returns ``(w, err_estimate)``.
    """
    n = v.shape[0]
    w = np.array(v, dtype=float)
    beta = float(np.linalg.norm(w))
    if t == 0.0 or beta == 0.0:
        return w, 0.0
    m = min(m, n)
    anorm = float(abs(A).sum(axis=0).max()) if hasattr(A, "sum") else float(np.linalg.norm(A, 1))
    if anorm == 0.0:
        return w, 0.0
    btol, gamma, delta, fac = 1e-7, 0.9, 1.2, 2.0
    tnow, total_err = 0.0, 0.0
    xm = 1.0 / m
    rndoff = anorm * np.finfo(float).eps
    tau = (1.0 / anorm) * ((fac * (m + 1) / math.e) ** (m + 1) * math.sqrt(2 * math.pi * (m + 1))) ** xm * (
        tol / (4 * beta * anorm)
    ) ** xm
    tau = min(t, tau) if tau > 0 else t
    steps = 0
    while tnow < t:
        steps += 1
        if steps > max_steps:
            raise KrylovNonconvergence(total_err, tol, tnow, t)
        tau = min(t - tnow, tau)
        V = np.zeros((n, m + 1))
        H = np.zeros((m + 2, m + 2))
        V[:, 0] = w / beta
        happy = False
        mb = m
        for j in range(m):
            p = A @ V[:, j]
            for i in range(j + 1):
                H[i, j] = V[:, i] @ p
                p -= H[i, j] * V[:, i]
            s = float(np.linalg.norm(p))
            if s < btol:
                happy = True
                mb = j + 1
                tau = t - tnow
                break
            H[j + 1, j] = s
            V[:, j + 1] = p / s
        if not happy:
            avnorm = float(np.linalg.norm(A @ V[:, m]))
            H[m + 1, m] = 1.0
        ireject = 0
        while True:
            mx = mb + (0 if happy else 2)
            F = sla.expm(tau * H[:mx, :mx])
            if happy:
                err_loc = btol
                break
            phi1 = abs(beta * F[m, 0])
            phi2 = abs(beta * F[m + 1, 0] * avnorm)
            if phi1 > 10 * phi2:
                err_loc = phi2
                xm = 1.0 / m
            elif phi1 > phi2:
                err_loc = phi1 * phi2 / (phi1 - phi2)
                xm = 1.0 / m
            else:
                err_loc = phi1
                xm = 1.0 / (m - 1)
            if err_loc <= delta * tau * tol:
                break
            tau = gamma * tau * (tau * tol / err_loc) ** xm
            ireject += 1
            if ireject > 50 or tau <= 0.0:
                raise KrylovNonconvergence(err_loc, tol, tnow, t)
        mx = mb + (0 if happy else 1)
        w = V[:, :mx] @ (beta * F[:mx, 0])
        beta = float(np.linalg.norm(w))
        tnow += tau
        total_err += max(err_loc, rndoff)
        if beta == 0.0:
            break
        tau = gamma * tau * (tau * tol / err_loc) ** xm
    return w, total_err


class SemigroupAction:
    """exp(tA) for one operator; method fixed by node count."""

    def __init__(self, op: SparseOperator, tol: float = 1e-10, method: str | None = None):
        self.op = op
        self.tol = tol
        if method is None:
            method = "dense" if op.size <= DENSE_LIMIT else "krylov"
        if method not in ("dense", "krylov"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._eig = None
        self._cache: dict[tuple[int, float], np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def grid(self):
        return self.op.grid

    def _eigh(self):
        if self._eig is None:
            lam, V = np.linalg.eigh(self.op.matrix.toarray())
            self._eig = (lam, V)
        return self._eig

    def propagator(self, t: float) -> np.ndarray:
        """Dense exp(tA), cached by (operator key, t)."""
        if self.method != "dense":
            raise RuntimeError("dense propagator requested for a Krylov action")
        key = (self.op.key, float(t))
        P = self._cache.get(key)
        if P is not None:
            return P
        if self.op.is_zero:
            P = np.eye(self.op.size)
        elif self.op.symmetric:
            lam, V = self._eigh()
            P = (V * np.exp(t * lam)) @ V.T
        else:
            P = sla.expm(t * self.op.matrix.toarray())
        with self._lock:
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = P
        return P

    def apply(self, v: np.ndarray, t: float, transpose: bool = False) -> np.ndarray:
        if t < 0:
            raise ValueError("t must be nonnegative")
        v = np.asarray(v, dtype=float)
        if t == 0.0 or self.op.is_zero:
            return v.copy()
        if self.method == "dense":
            if self.op.symmetric and (self.op.key, float(t)) not in self._cache:
                lam, V = self._eigh()
                return V @ (np.exp(t * lam) * (V.T @ v))
            P = self.propagator(t)
            return P.T @ v if transpose else P @ v
        A = self.op.matrix.T.tocsr() if transpose else self.op.matrix
        w, _ = krylov_expv(A, v, t, tol=self.tol)
        return w


def evolve(action: SemigroupAction, v: GridFunction, t: float) -> GridFunction:
    if v.grid != action.grid:
        raise ValueError("grid mismatch between state and operator")
    return GridFunction(v.grid, action.apply(v.values, t))


@dataclass
class KernelSlice:
    node: int
    t: float
    values: GridFunction
    weight: float

    @property
    def mass(self) -> float:
        return float(np.sum(self.values.values) * self.weight)

    @property
    def min_value(self) -> float:
        return float(np.min(self.values.values))


def kernel_slice(action: SemigroupAction, node: int, t: float) -> KernelSlice:
    if t <= 0:
        raise ValueError("kernel needs t > 0")
    e = np.zeros(action.op.size)
    e[node] = 1.0
    row = action.apply(e, t, transpose=True)
    w = action.grid.weight
    return KernelSlice(node, t, GridFunction(action.grid, row / w), w)


def kernel_mass(action: SemigroupAction, node: int, t: float) -> float:
    """Integral of h_t(x, .) over the grid, i.e. (exp(tA) 1)(x)."""
    if t <= 0:
        raise ValueError("kernel needs t > 0")
    ones = np.ones(action.op.size)
    return float(action.apply(ones, t)[node])


def semigroup_defect(action: SemigroupAction, t: float, s: float, v: GridFunction | np.ndarray) -> float:
    vals = v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)
    nv = float(np.max(np.abs(vals)))
    if nv == 0.0 or s == 0.0 or t == 0.0:
        return 0.0
    lhs = action.apply(action.apply(vals, s), t)
    rhs = action.apply(vals, t + s)
    return float(np.max(np.abs(lhs - rhs)) / nv)


def negative_fraction(values: np.ndarray, rel_tol: float = 1e-12) -> float:
    """Share of entries below ``-rel_tol * max|values|`` (round-off is not negativity)."""
    values = np.asarray(values)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.mean(values < -rel_tol * scale))


def gaussian_kernel(x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Free-space heat kernel of the Laplacian, (4 pi t)^(-n/2) exp(-|x-y|^2 / 4t)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = x.shape[-1]
    r2 = np.sum((y - x) ** 2, axis=-1)
    return (4 * math.pi * t) ** (-n / 2) * np.exp(-r2 / (4 * t))
