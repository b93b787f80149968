"""Mild solutions by Picard iteration of the Duhamel map, with continuation.

On a uniform mesh t_j = j dt the trapezoidal Duhamel sum

    Phi(v)_j = S(t_j) u0 + sum_i w_i S(t_j - t_i) g_i,   g = |v|^p + f,

(w_0 = w_j = dt/2, otherwise dt) obeys the one-step recurrence

    Phi_j = S(dt) [Phi_{j-1} + dt/2 g_{j-1}] + dt/2 g_j,

so a sweep costs J applications of S(dt) instead of J^2/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, GridFunction, SparseOperator, assemble_operator
from .fields import VectorFieldSystem
from .semigroup import SemigroupAction

__all__ = [
    "ProblemSpec",
    "TimeMesh",
    "Trajectory",
    "PicardConfig",
    "PicardResult",
    "ContinuationState",
    "BallViolation",
    "PicardNonconvergence",
    "delta_bound",
    "local_time_horizon",
    "picard_map",
    "picard_solve",
    "duhamel_residual",
    "continue_to_Tmax",
]


class BallViolation(RuntimeError):
    def __init__(self, norm: float, radius: float, iteration: int):
        super().__init__(f"iterate {iteration} left the ball: norm {norm:.6g} > radius {radius:.6g}")
        self.norm, self.radius, self.iteration = norm, radius, iteration


class PicardNonconvergence(RuntimeError):
    def __init__(self, history: list[float], tol: float):
        super().__init__(f"no convergence in {len(history)} iterations: last difference {history[-1]:.3e} > {tol:.1e}")
        self.history = history


@dataclass
class ProblemSpec:
    system: VectorFieldSystem
    grid: Grid
    p: float
    f: GridFunction
    u0: GridFunction
    operator: SparseOperator | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        for name, g in (("f", self.f), ("u0", self.u0)):
            if g.grid != self.grid:
                raise ValueError(f"{name} lives on a different grid")
            if not np.all(np.isfinite(g.values)):
                raise ValueError(f"{name} has non-finite values")
        if self.operator is None:
            self.operator = assemble_operator(self.system, self.grid)

    def with_u0(self, u0: GridFunction) -> "ProblemSpec":
        return ProblemSpec(self.system, self.grid, self.p, self.f, u0, self.operator)

    def with_f(self, f: GridFunction) -> "ProblemSpec":
        return ProblemSpec(self.system, self.grid, self.p, f, self.u0, self.operator)


@dataclass(frozen=True)
class TimeMesh:
    T: float
    J: int
    start: float = 0.0

    def __post_init__(self):
        if self.J < 2:
            raise ValueError("need J >= 2")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.J

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.T * np.arange(self.J + 1) / self.J


@dataclass
class Trajectory:
    mesh: TimeMesh
    grid: Grid
    values: np.ndarray  # (J+1, nodes)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.J + 1, self.grid.size):
            raise ValueError("trajectory shape does not match mesh and grid")

    @classmethod
    def constant(cls, mesh: TimeMesh, u: GridFunction) -> "Trajectory":
        return cls(mesh, u.grid, np.repeat(u.values[None, :], mesh.J + 1, axis=0))

    def norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at(self, j: int) -> GridFunction:
        return GridFunction(self.grid, self.values[j])

    def end(self) -> GridFunction:
        return self.at(-1)

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=1)

    def lq_norms(self, q: float) -> np.ndarray:
        return np.array([self.at(j).lq_norm(q) for j in range(self.mesh.J + 1)])

    def interpolate(self, t) -> np.ndarray:
        """Values at times t (piecewise linear in time); shape (len(t), nodes)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = (t - self.mesh.start) / self.mesh.dt
        j = np.clip(np.floor(s).astype(int), 0, self.mesh.J - 1)
        frac = (s - j)[:, None]
        return (1 - frac) * self.values[j] + frac * self.values[j + 1]

    def distance(self, other: "Trajectory") -> float:
        return float(np.max(np.abs(self.values - other.values)))


@dataclass
class PicardConfig:
    max_iter: int = 100
    tol: float = 1e-10
    q_star: float = 0.5
    blowup: float = 1e8
    J: int = 64
    lipschitz: float | None = None  # None means C(p) = p
    default_horizon: float = 1.0
    ball_slack: float = 1e-6
    max_segments: int = 5000

    def __post_init__(self):
        if not 0 < self.q_star < 1:
            raise ValueError("q_star must lie in (0, 1)")

    def C(self, p: float) -> float:
        return float(p) if self.lipschitz is None else float(self.lipschitz)


def delta_bound(u0: GridFunction | np.ndarray, f: GridFunction | np.ndarray) -> float:
    a = u0.values if isinstance(u0, GridFunction) else np.asarray(u0)
    b = f.values if isinstance(f, GridFunction) else np.asarray(f)
    return float(max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0)))


def local_time_horizon(delta: float, p: float, cfg: PicardConfig | None = None) -> float:
    """min(1/(2^p delta^(p-1) + 1), q*/(C(p) 2^p delta^(p-1))).

    The first term keeps delta + T((2 delta)^p + delta) <= 2 delta, the
    second bounds the contraction factor C(p) 2^p delta^(p-1) T by q*.
    """
    cfg = cfg or PicardConfig()
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return cfg.default_horizon
    g = 2.0**p * delta ** (p - 1)
    return min(1.0 / (g + 1.0), cfg.q_star / (cfg.C(p) * g))


def _step(action: SemigroupAction, v: np.ndarray, dt: float) -> np.ndarray:
    return action.apply(v, dt)


def picard_map(v: Trajectory, spec: ProblemSpec, action: SemigroupAction) -> Trajectory:
    dt = v.mesh.dt
    g = np.abs(v.values) ** spec.p + spec.f.values[None, :]
    out = np.empty_like(v.values)
    out[0] = spec.u0.values
    for j in range(1, v.mesh.J + 1):
        out[j] = _step(action, out[j - 1] + 0.5 * dt * g[j - 1], dt) + 0.5 * dt * g[j]
    return Trajectory(v.mesh, v.grid, out)


def duhamel_residual(u: Trajectory, spec: ProblemSpec, action: SemigroupAction) -> float:
    return u.distance(picard_map(u, spec, action))


@dataclass
class PicardResult:
    trajectory: Trajectory
    history: list[float]
    iterations: int
    contraction_rate: float
    delta: float
    T: float

    @property
    def converged(self) -> bool:
        return True


def contraction_rate(history: list[float]) -> float:
    """Geometric mean of successive difference ratios (0 when fewer than two)."""
    h = [x for x in history if x > 0]
    if len(h) < 2:
        return 0.0
    ratios = np.array(h[1:]) / np.array(h[:-1])
    return float(np.exp(np.mean(np.log(ratios))))


def picard_solve(
    spec: ProblemSpec,
    T: float | str,
    cfg: PicardConfig | None = None,
    action: SemigroupAction | None = None,
    initial: Trajectory | None = None,
    start: float = 0.0,
) -> PicardResult:
    cfg = cfg or PicardConfig()
    action = action or SemigroupAction(spec.operator)
    delta = delta_bound(spec.u0, spec.f)
    if T == "auto":
        T = local_time_horizon(delta, spec.p, cfg)
    mesh = TimeMesh(float(T), cfg.J, start)
    radius = 2 * delta
    limit = radius * (1 + cfg.ball_slack)
    v = initial if initial is not None else Trajectory.constant(mesh, spec.u0)
    if v.norm() > limit:
        raise BallViolation(v.norm(), radius, 0)
    history: list[float] = []
    for it in range(1, cfg.max_iter + 1):
        w = picard_map(v, spec, action)
        diff = w.distance(v)
        history.append(diff)
        nrm = w.norm()
        if not math.isfinite(nrm) or nrm > limit:
            raise BallViolation(nrm, radius, it)
        v = w
        if diff <= cfg.tol:
            return PicardResult(v, history, it, contraction_rate(history), delta, float(T))
    raise PicardNonconvergence(history, cfg.tol)


@dataclass
class ContinuationState:
    segments: list[tuple[float, float, Trajectory]] = field(default_factory=list)
    T_max: float = 0.0
    reason: str = ""
    sup_norms: list[float] = field(default_factory=list)
    boundary: float = 0.0
    message: str = ""

    @property
    def segment_count(self) -> int:
        return len(self.segments)


def continue_to_Tmax(
    spec: ProblemSpec,
    cfg: PicardConfig | None = None,
    action: SemigroupAction | None = None,
    horizon: float = 10.0,
    keep_trajectories: bool = True,
) -> ContinuationState:
    """Solve segment after segment, restarting from each segment's end value.

    Reasons: "horizon" (reached ``horizon``), "blow-up" (sup norm >= B),
    "contraction failure" (a segment solve failed), "segment budget".
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    cfg = cfg or PicardConfig()
    action = action or SemigroupAction(spec.operator)
    state = ContinuationState()
    t = 0.0
    cur = spec
    while True:
        delta = delta_bound(cur.u0, cur.f)
        seg = min(local_time_horizon(delta, spec.p, cfg), horizon - t)
        try:
            res = picard_solve(cur, seg, cfg, action, start=t)
        except (BallViolation, PicardNonconvergence) as err:
            state.reason = "contraction failure"
            state.message = str(err)
            break
        traj = res.trajectory
        state.segments.append((t, t + seg, traj if keep_trajectories else None))
        t += seg
        end = traj.end()
        state.sup_norms.append(end.sup_norm())
        state.boundary = end.boundary_sup()
        if end.sup_norm() >= cfg.blowup:
            state.reason = "blow-up"
            break
        if t >= horizon * (1 - 1e-14):
            state.reason = "horizon"
            break
        if len(state.segments) >= cfg.max_segments:
            state.reason = "segment budget"
            break
        cur = cur.with_u0(end)
    state.T_max = t
    return state
