"""Named forcing and initial-data families, usable on grids and in quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .discretization import Grid, GridFunction, sample
from .functionals.profiles import CutoffProfile

__all__ = ["Source", "FORCING_KINDS", "INITIAL_KINDS", "forcing", "initial", "from_spec"]

FORCING_KINDS = ("zero", "gaussian-bump", "power-tail", "plateau")
INITIAL_KINDS = ("zero", "gaussian", "constant")


@dataclass(frozen=True)
class Source:
    """A radial profile g(|x|) scaled by ``amplitude``; all families here are radial."""

    kind: str
    amplitude: float = 0.0
    params: Mapping[str, float] = field(default_factory=dict)

    radial = True

    def profile(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        a = self.amplitude
        k = self.kind
        if k == "zero" or a == 0.0:
            return np.zeros_like(r)
        if k == "gaussian-bump":
            return a * np.exp(-r * r)
        if k == "gaussian":
            w = self.params.get("width", 1.0)
            return a * np.exp(-((r / w) ** 2))
        if k == "power-tail":
            lam = self.params["lambda"]
            with np.errstate(divide="ignore"):
                return a * np.where(r > 1.0, r ** (-lam), 1.0)
        if k == "plateau":
            return a * CutoffProfile(self.params.get("kappa", 8)).evaluate(r * r)[0]
        if k == "constant":
            return np.full_like(r, a)
        raise ValueError(f"unknown source kind {k!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.profile(np.linalg.norm(x, axis=-1))

    @property
    def radial_breaks(self) -> tuple[float, ...]:
        """Radii where the profile is not smooth."""
        if self.kind == "power-tail":
            return (1.0,)
        if self.kind == "plateau":
            return (1.0, 2**0.5)
        return ()

    @property
    def nonnegative(self) -> bool:
        return self.amplitude >= 0

    def on(self, grid: Grid) -> GridFunction:
        return sample(self, grid)

    def describe(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, **dict(self.params)}


def forcing(kind: str = "zero", eps: float = 0.0, lam: float | None = None, kappa: float = 8) -> Source:
    if kind not in FORCING_KINDS:
        raise ValueError(f"unknown forcing {kind!r}; expected one of {FORCING_KINDS}")
    params = {}
    if kind == "power-tail":
        if lam is None or lam <= 0:
            raise ValueError("power-tail forcing needs lambda > 0")
        params["lambda"] = float(lam)
    if kind == "plateau":
        params["kappa"] = float(kappa)
    return Source(kind, float(eps), params)


def initial(kind: str = "zero", amplitude: float = 0.0, width: float = 1.0) -> Source:
    if kind not in INITIAL_KINDS:
        raise ValueError(f"unknown initial data {kind!r}; expected one of {INITIAL_KINDS}")
    params = {"width": float(width)} if kind == "gaussian" else {}
    return Source(kind, float(amplitude), params)


def from_spec(spec: Mapping | None, role: str) -> Source:
    """Build from a config mapping such as {"kind": "power-tail", "eps": 0.1, "lambda": 2}."""
    spec = dict(spec or {"kind": "zero"})
    kind = spec.pop("kind", "zero")
    if role == "forcing":
        return forcing(kind, float(spec.get("eps", spec.get("amplitude", 0.0))), spec.get("lambda"), spec.get("kappa", 8))
    if role == "initial":
        return initial(kind, float(spec.get("amplitude", 0.0)), float(spec.get("width", 1.0)))
    raise ValueError(f"unknown role {role!r}")
