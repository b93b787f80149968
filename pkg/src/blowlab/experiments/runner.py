"""Dispatch of each experiment kind, sweep execution and output writing."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .. import __version__
from ..discretization import assemble_operator, convergence_order, export_coo, refine
from ..fields import CoefficientExpr, VectorFieldSystem
from ..functionals.exponents import (
    blowup_upper_bound,
    conjugate,
    critical_exponent_lower_bound,
    theoretical_exponent,
    young_constant,
)
from ..functionals.families import make_family
from ..functionals.scaling import fit_scaling
from ..functionals.weak import weak_form_residual, young_split_check
from ..lines import IMEXConfig, blowup_time, run
from ..mild import (
    PicardConfig,
    ProblemSpec,
    TimeMesh,
    Trajectory,
    continue_to_Tmax,
    duhamel_residual,
    picard_solve,
)
from ..semigroup import SemigroupAction, gaussian_kernel, kernel_mass, kernel_slice, negative_fraction, semigroup_defect
from ..sources import from_spec
from . import plotting
from .config import ConfigError, build_grid, build_system
from .results import Check, Table, jsonable, summarize, write_csv, write_json_atomic, write_text_atomic

__all__ = ["Outcome", "PointError", "run_experiment", "sweep"]


@dataclass
class PointError:
    index: int
    point: Any
    error: str


@dataclass
class Outcome:
    table: Table
    checks: list[Check] = field(default_factory=list)
    details: dict = field(default_factory=dict)
    plots: list[Callable[[Path], Path]] = field(default_factory=list)
    errors: list[PointError] = field(default_factory=list)
    files: list[str] = field(default_factory=list)


def sweep(fn: Callable[[Any], Any], points: Sequence[Any], workers: int) -> tuple[list[Any], list[PointError]]:
    """Run ``fn`` on every point; results keep input order, failures become PointErrors."""

    def guarded(item):
        i, pt = item
        try:
            return i, fn(pt), None
        except Exception as err:  # every sweep point reports its own failure
            return i, None, PointError(i, pt, f"{type(err).__name__}: {err}")

    items = list(enumerate(points))
    if workers <= 1 or len(items) <= 1:
        done = [guarded(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(guarded, items))
    results = [r for _, r, e in done]
    errors = [e for _, _, e in done if e is not None]
    return results, errors


def _problem(cfg: dict, system: VectorFieldSystem, grid) -> ProblemSpec:
    f = from_spec(cfg.get("forcing"), "forcing").on(grid)
    u0 = from_spec(cfg.get("initial"), "initial").on(grid)
    return ProblemSpec(system, grid, float(cfg["p"]), f, u0)


def _default_probe(n: int) -> CoefficientExpr:
    u = CoefficientExpr.zero(n)
    prod = CoefficientExpr.constant(n, 1)
    for i in range(n):
        u = u + CoefficientExpr.sin(n, i)
        prod = prod * CoefficientExpr.sin(n, i)
    return u + prod if n > 1 else u


def _probe_from_table(n: int, terms) -> CoefficientExpr:
    z = [0] * n
    keys = [((tuple(t.get("pow", z)), tuple(t.get("sin", z)), tuple(t.get("cos", z))), t.get("c", 1)) for t in terms]
    return CoefficientExpr.from_terms(n, keys)


# ---------------------------------------------------------------- operator-check


def _operator_check(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    levels = int(cfg["levels"])
    if levels < 3:
        raise ConfigError("operator-check needs levels >= 3")
    grids = [build_grid(cfg["grid"], system.n)]
    for _ in range(levels - 1):
        grids.append(refine(grids[-1]))
    u = _probe_from_table(system.n, cfg["probe"]) if cfg.get("probe") else _default_probe(system.n)
    res = convergence_order(system, u, grids)
    table = Table(["level", "nodes", "h", "max_error"])
    for i, (g, h, e) in enumerate(zip(grids, res.spacings, res.errors)):
        table.add(i, g.size, float(h), float(e))
    tol = float(cfg["tolerances"]["order"])
    if res.indeterminate:
        check = Check("convergence order", None, 2.0, tol, True, "stencil exact for this probe; order indeterminate")
    else:
        check = Check("convergence order", res.order, 2.0, tol, abs(res.order - 2.0) <= tol, "; ".join(res.diagnostics))
    oc = Outcome(table, [check], {"system": system.describe(), "diagnostics": res.diagnostics, "probe": repr(u)})
    if cfg.get("export_operator"):
        export_coo(assemble_operator(system, grids[0]), out / "operator.coo")
        oc.files.append("operator.coo")
    if res.order is not None:
        fit = np.polyfit(np.log(res.spacings), np.log(res.errors), 1)
        oc.plots.append(
            lambda d: plotting.loglog_fit_svg(
                d / "convergence.svg", np.log(res.spacings), np.log(res.errors), fit[0], fit[1], 2.0, "log h", "log error"
            )
        )
    return oc


# ---------------------------------------------------------------- kernel-check


def _kernel_check(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    grid = build_grid(cfg["grid"], system.n)
    action = SemigroupAction(assemble_operator(system, grid))
    tols = cfg["tolerances"]
    mass_tol = tols.get("mass")
    if mass_tol is None:
        mass_tol = 1e-4 if system.tag == "engel" else 1e-8
    rng = np.random.default_rng(int(cfg["seed"]))
    interior = np.flatnonzero(grid.stencil_interior_mask())
    center = grid.nearest_node([0.0] * system.n)
    nprobe = int(cfg["probes"])
    extra = rng.choice(interior, size=max(0, min(nprobe - 1, interior.size)), replace=False) if nprobe > 1 else []
    nodes = [int(center)] + sorted(int(i) for i in extra if i != center)
    times = [float(t) for t in cfg["times"]]
    coords = grid.coords()
    gaussian_ok = system.tag == "euclidean"
    table = Table(["node"] + [f"x{i + 1}" for i in range(system.n)] + ["t", "mass", "min_value", "negative_fraction", "gaussian_peak_error"])
    worst_mass = -math.inf
    worst_gauss = 0.0
    for node in nodes:
        for t in times:
            ks = kernel_slice(action, node, t)
            mass = kernel_mass(action, node, t)
            worst_mass = max(worst_mass, mass)
            gerr = None
            if gaussian_ok:
                exact = float(gaussian_kernel(coords[node], coords[node][None, :], t)[0])
                gerr = abs(float(ks.values.values[node]) - exact) / exact
                if node == center:
                    worst_gauss = max(worst_gauss, gerr)
            table.add(node, *[float(v) for v in coords[node]], t, mass, ks.min_value, negative_fraction(ks.values.values), gerr)
    defects = []
    for _ in range(int(cfg["defect_pairs"])):
        t, s = (float(v) for v in rng.uniform(min(times) / 2, max(times), size=2))
        v = rng.standard_normal(grid.size)
        defects.append(semigroup_defect(action, t, s, v))
    checks = [
        Check("semigroup defect", max(defects, default=0.0), 0.0, float(tols["defect"]), max(defects, default=0.0) <= float(tols["defect"]), f"method {action.method}"),
        Check("kernel mass <= 1", worst_mass, 1.0, mass_tol, worst_mass <= 1.0 + mass_tol),
    ]
    if gaussian_ok:
        checks.append(Check("gaussian peak match", worst_gauss, 0.0, float(tols["gaussian"]), worst_gauss <= float(tols["gaussian"]), "box kernel vs free space at the centre node"))
    return Outcome(table, checks, {"system": system.describe(), "method": action.method, "defects": defects})


# ---------------------------------------------------------------- picard


def _picard(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    grid = build_grid(cfg["grid"], system.n)
    spec = _problem(cfg, system, grid)
    pc = PicardConfig(J=int(cfg["J"]), tol=float(cfg["tol"]), q_star=float(cfg["q_star"]))
    action = SemigroupAction(spec.operator)
    T = cfg["T"] if cfg["T"] == "auto" else float(cfg["T"])
    first = picard_solve(spec, T, pc, action)
    # a second, different in-ball starting iterate: the zero trajectory
    mesh = TimeMesh(first.T, pc.J)
    second = picard_solve(spec, first.T, pc, action, initial=Trajectory(mesh, grid, np.zeros((pc.J + 1, grid.size))))
    resid = duhamel_residual(first.trajectory, spec, action)
    gap = first.trajectory.distance(second.trajectory)
    table = Table(["start", "iteration", "difference"])
    for name, r in (("constant-u0", first), ("zero", second)):
        for i, d in enumerate(r.history, 1):
            table.add(name, i, float(d))
    tols = cfg["tolerances"]
    checks = [
        Check("duhamel residual", resid, 0.0, float(tols["residual"]), resid <= float(tols["residual"])),
        Check("uniqueness gap", gap, 0.0, float(tols["uniqueness"]), gap <= float(tols["uniqueness"])),
    ]
    if cfg["T"] == "auto":
        checks.insert(0, Check("contraction rate", first.contraction_rate, pc.q_star, float(tols["rate"]), first.contraction_rate <= float(tols["rate"]), "bound is absolute"))
    details = {
        "T": first.T,
        "delta": first.delta,
        "iterations": first.iterations,
        "contraction_rate": first.contraction_rate,
        "final_sup_norm": float(first.trajectory.sup_norms()[-1]),
    }
    hist = first.history
    oc = Outcome(table, checks, details)
    oc.plots.append(lambda d: plotting.series_svg(d / "picard_history.svg", list(range(1, len(hist) + 1)), {"sup difference": hist}, "iteration", "difference", logy=True))
    return oc


# ---------------------------------------------------------------- simulate


def _picard_at(state, t: float) -> np.ndarray:
    for a, b, traj in state.segments:
        if a - 1e-12 <= t <= b + 1e-12:
            return traj.interpolate([t])[0]
    raise ValueError(f"time {t} outside the continuation range")


def _simulate(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    grid = build_grid(cfg["grid"], system.n)
    spec = _problem(cfg, system, grid)
    horizon = float(cfg["horizon"])
    record = sorted(float(t) for t in cfg["record"] if 0 < float(t) <= horizon)
    base = IMEXConfig(dt0=float(cfg["dt0"]), blowup=float(cfg["blowup"]))
    runs = [run(spec, horizon, base, record_times=record)]
    state = None
    if cfg.get("compare_picard"):
        runs.append(run(spec, horizon, IMEXConfig(dt0=base.dt0 / 2, blowup=base.blowup), record_times=record))
        state = continue_to_Tmax(spec, PicardConfig(J=int(cfg["J"]), blowup=base.blowup), SemigroupAction(spec.operator), horizon=horizon)
    table = Table(["level", "dt0", "t", "sup_norm", "boundary_sup", "picard_relative_difference"])
    gaps: list[list[float]] = []
    for lvl, r in enumerate(runs):
        dt0 = base.dt0 / 2**lvl
        row_gaps = []
        for t, snap in zip(r.times, r.snapshots):
            diff = None
            if state is not None and t <= state.T_max + 1e-12 and t > 0:
                ref = _picard_at(state, t)
                diff = float(np.max(np.abs(snap.values - ref)) / max(np.max(np.abs(ref)), 1e-300))
                row_gaps.append(diff)
            table.add(lvl, dt0, float(t), snap.sup_norm(), snap.boundary_sup(), diff)
        gaps.append(row_gaps)
    first = runs[0]
    peak = max(s for _, s in first.sup_history)
    tols = cfg["tolerances"]
    checks = [
        Check("boundary diagnostic", first.boundary, 0.0, float(tols["boundary"]) * max(peak, 1.0), first.boundary <= float(tols["boundary"]) * max(peak, 1.0), "|u| on the box edge relative to peak sup"),
    ]
    if state is not None:
        if first.blowup:
            checks.append(Check("picard vs MOL", None, 0.0, float(tols["cross"]), False, "comparison needs a run without blow-up"))
        else:
            g = max(gaps[-1], default=math.nan)
            checks.append(Check("picard vs MOL (refined dt)", g, 0.0, float(tols["cross"]), g <= float(tols["cross"]), f"coarse level {max(gaps[0], default=math.nan):.3e}"))
    details = {
        "blowup": first.blowup,
        "T_blow": first.T_blow,
        "reason": first.reason,
        "steps": first.steps,
        "rejected": first.rejected,
        "picard_reason": None if state is None else state.reason,
    }
    ts = [t for t, _ in first.sup_history]
    ss = [s for _, s in first.sup_history]
    oc = Outcome(table, checks, details)
    oc.plots.append(lambda d: plotting.series_svg(d / "sup_norm.svg", ts, {"sup |u|": ss}, "t", "sup |u|", logy=True))
    return oc


# ---------------------------------------------------------------- blowup-scan


def _blowup_scan(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    grid = build_grid(cfg["grid"], system.n)
    p = float(cfg["p"])
    fspec = dict(cfg["forcing"])
    lam = fspec.get("lambda")
    eps_list = sorted(float(e) for e in cfg["eps"])
    imex = IMEXConfig(dt0=float(cfg["dt0"]), blowup=float(cfg["blowup"]))
    u0 = from_spec(cfg.get("initial"), "initial").on(grid)
    op = assemble_operator(system, grid)

    def point(eps: float):
        f = from_spec({**fspec, "eps": eps}, "forcing").on(grid)
        spec = ProblemSpec(system, grid, p, f, u0, op)
        return blowup_time(spec, imex, horizon=float(cfg["horizon"]))

    results, errors = sweep(point, eps_list, int(cfg["workers"]))
    table = Table(["eps", "T_blow", "uncertainty", "T_refined", "boundary_sup", "reason"])
    ok = []
    for e, r in zip(eps_list, results):
        if r is None:
            table.add(e, None, None, None, None, "error")
            continue
        table.add(e, r.T_blow, r.uncertainty, r.second, r.boundary, r.reason)
        ok.append((e, r))
    tols = cfg["tolerances"]
    checks: list[Check] = []
    details: dict = {"lambda": lam, "p": p}
    oc = Outcome(table, checks, details, errors=errors)
    if len(ok) < 2:
        checks.append(Check("blow-up observed", len(ok), len(eps_list), 0, False, "fewer than two points blew up"))
        return oc
    es = np.array([e for e, _ in ok])
    Ts = np.array([r.T_blow for _, r in ok])
    dec = bool(np.all(np.diff(Ts) < 0))
    checks.append(Check("T_blow strictly decreasing in eps", dec, True, None, dec))
    fit = np.polyfit(np.log(es), np.log(Ts), 1)
    checks.append(Check("log-log slope <= 0", float(fit[0]), 0.0, None, fit[0] <= 0))
    unc = max(r.relative_uncertainty for _, r in ok)
    checks.append(Check("refinement uncertainty", unc, 0.0, float(tols["uncertainty"]), unc <= float(tols["uncertainty"]), "T_blow vs dt0/2 and 10B rerun"))
    theta = None
    if lam is not None and 0 < float(lam) < float(conjugate(p)):
        pc = float(conjugate(p))
        theta = -2.0 / (pc - float(lam))
        # C1 from the largest eps: T = (C1 eps)^theta
        C1 = Ts[-1] ** (1.0 / theta) / es[-1]
        factor = float(tols["bound_factor"])
        ratios = [float(T / blowup_upper_bound(e, float(lam), p, C1)) for e, T in zip(es[:-1], Ts[:-1])]
        worst = max(ratios)
        checks.append(Check("T_blow <= bound (C1 at largest eps)", worst, 1.0, factor, worst <= factor, f"bound exponent -2/(p' - lambda) = {theta:.6g}"))
        details.update({"C1": float(C1), "bound_exponent": theta, "bound_ratios": ratios})
    details["fitted_slope"] = float(fit[0])
    oc.plots.append(lambda d: plotting.loglog_fit_svg(d / "blowup_scan.svg", np.log(es), np.log(Ts), fit[0], fit[1], theta, "log eps", "log T_blow"))
    return oc


# ---------------------------------------------------------------- functional-scan


def _functional_scan(cfg: dict, out: Path) -> Outcome:
    kind = cfg["family"]
    system = build_system(cfg["system"])
    p = float(cfg["p"])
    params = cfg["R"] if kind == "critical-log" else cfg["T"]
    if params is None:
        raise ConfigError(f"functional-scan of kind {kind!r} needs the {'R' if kind == 'critical-log' else 'T'} list")
    forcing = from_spec(cfg["forcing"], "forcing") if cfg.get("forcing") else None
    report = fit_scaling(kind, system, p, params, tolerance=float(cfg["tolerances"]["slope"]), kappa=cfg.get("kappa"), forcing=forcing)
    label = "R" if kind == "critical-log" else "T"
    table = Table([label, "I_delta", "I_t", "F"])
    for row in report.rows:
        table.add(*(float(v) for v in row))
    rel = "<=" if report.one_sided else "="
    check = Check(
        f"slope {rel} theta",
        report.slope,
        report.theta,
        report.tolerance,
        report.passed,
        ("one-sided upper bound" if report.one_sided else "") + ("; " if report.one_sided and report.diagnostics else "") + "; ".join(report.diagnostics),
    )
    details = {
        "kind": kind,
        "slope": report.slope,
        "stderr": report.stderr,
        "intercept": report.intercept,
        "residual_rms": report.residual_rms,
        "slope_I_t": report.slope_t,
        "theta": report.theta,
        "kappa": report.kappa,
    }
    xs, ys = report.abscissa(), report.ordinate()
    xl = "log(ln sqrt R)" if kind == "critical-log" else "log T"
    yl = "log(I_delta / T)" if kind == "critical-log" else "log I_delta"
    oc = Outcome(table, [check], details)
    oc.plots.append(lambda d: plotting.loglog_fit_svg(d / "functional_scan.svg", xs, ys, report.slope, report.intercept, report.theta, xl, yl, kind))
    return oc


# ---------------------------------------------------------------- exponent-table


def _exponent_table(cfg: dict, out: Path) -> Outcome:
    n = int(cfg["n"])
    k = int(cfg["grushin_k"])
    en = int(cfg["engel_n"])
    cn = int(cfg.get("constant_n", n + 1))
    table = Table(["quantity", "kind", "parameter", "exact", "value"])
    rows = [
        ("parabolic", f"n={n}", lambda: critical_exponent_lower_bound("parabolic", n)),
        ("constant", f"n={cn}", lambda: critical_exponent_lower_bound("constant", cn)),
        ("grushin", f"k={k}", lambda: critical_exponent_lower_bound("grushin", 2, k)),
        ("engel", f"n={en}", lambda: critical_exponent_lower_bound("engel", en)),
    ]
    checks = []
    for kind, par, fn in rows:
        try:
            v = fn()
        except ValueError as err:
            checks.append(Check(f"threshold {kind} {par}", None, None, None, False, str(err)))
            continue
        table.add("threshold", kind, par, v, float(v))
        checks.append(Check(f"threshold {kind} {par}", v, v, 0, isinstance(v, Fraction), "exact rational"))
    for p in cfg["p"]:
        for kind, nn, kk in (("parabolic", n, 1), ("constant", cn, 1), ("grushin", 2, k), ("engel", en, 1)):
            th = theoretical_exponent(kind, nn, p, kk)
            table.add("slope", kind, f"n={nn};k={kk};p={p}", th, float(th))
        table.add("young", "", f"p={p}", None, young_constant(p))
    return Outcome(table, checks, {"rows": len(table.rows)})


# ---------------------------------------------------------------- weak-residual


def _weak_residual(cfg: dict, out: Path) -> Outcome:
    system = build_system(cfg["system"])
    p = float(cfg["p"])
    T = float(cfg["T"])
    fam = make_family(cfg["family"], system, p, T)
    ladder = [(int(a), int(b)) for a, b in cfg["ladder"]]
    if len(ladder) < 2:
        raise ConfigError("weak-residual needs at least two ladder levels")
    hw = cfg["half_width"]

    def point(level):
        N, J = level
        grid = build_grid({"half_width": hw, "points": N}, system.n)
        spec = _problem(cfg, system, grid)
        sol = picard_solve(spec, fam.time_support[1], PicardConfig(J=J), SemigroupAction(spec.operator))
        return weak_form_residual(sol.trajectory, fam, spec), max(spec.grid.spacing), fam.time_support[1] / J

    results, errors = sweep(point, ladder, int(cfg["workers"]))
    table = Table(["N", "J", "h", "dt", "residual", "scale", "support_inside", "young_lhs", "young_rhs"])
    good = []
    for (N, J), r in zip(ladder, results):
        if r is None:
            table.add(N, J, None, None, None, None, None, None, None)
            continue
        w, h, dt = r
        ys = young_split_check(w, p)
        table.add(N, J, float(h), float(dt), w.residual, w.scale, w.support_inside, ys.lhs, ys.rhs)
        good.append((h, abs(w.residual), w, ys))
    checks = []
    details: dict = {"family": fam.kind, "T": T}
    oc = Outcome(table, checks, details, errors=errors)
    if len(good) >= 2:
        hs = np.array([g[0] for g in good])
        rs = np.array([g[1] for g in good])
        order = float(np.polyfit(np.log(hs), np.log(rs), 1)[0])
        dec = bool(np.all(np.diff(rs) < 0))
        tol = float(cfg["tolerances"]["order"])
        checks.append(Check("residual decreasing", dec, True, None, dec))
        checks.append(Check("residual order", order, tol, None, order >= tol, "least-squares slope against h; must be at least the expected value"))
        inside = all(g[2].support_inside for g in good)
        checks.append(Check("test function inside box", inside, True, None, inside))
        yh = all(g[3].holds for g in good)
        checks.append(Check("young split", yh, True, None, yh, "F + u0 term <= Y (I_delta + I_t) + |R|"))
        details["order"] = order
        fit = np.polyfit(np.log(hs), np.log(rs), 1)
        oc.plots.append(lambda d: plotting.loglog_fit_svg(d / "weak_residual.svg", np.log(hs), np.log(rs), fit[0], fit[1], None, "log h", "log |R|"))
    else:
        checks.append(Check("residual ladder", len(good), len(ladder), None, False, "too few levels completed"))
    return oc


_DISPATCH = {
    "operator-check": _operator_check,
    "kernel-check": _kernel_check,
    "picard": _picard,
    "simulate": _simulate,
    "blowup-scan": _blowup_scan,
    "functional-scan": _functional_scan,
    "exponent-table": _exponent_table,
    "weak-residual": _weak_residual,
}


def run_experiment(cfg: dict, out: str | Path) -> dict:
    """Run one configured experiment, write its outputs under ``out``, return the manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg["experiment"]
    t0 = time.perf_counter()
    try:
        oc = _DISPATCH[kind](cfg, out)
        fatal = None
    except Exception as err:  # the manifest records the failure instead of a traceback
        oc = Outcome(Table(["error"]), [], {}, errors=[PointError(-1, None, f"{type(err).__name__}: {err}")])
        oc.table.add(f"{type(err).__name__}: {err}")
        fatal = f"{type(err).__name__}: {err}"
    wall = time.perf_counter() - t0
    write_csv(out / "results.csv", oc.table)
    files = ["results.csv", *oc.files]
    for make in oc.plots:
        try:
            files.append(str(make(out / "plots").relative_to(out)))
        except Exception as err:  # a broken figure must not hide the numbers
            oc.errors.append(PointError(-1, "plot", f"{type(err).__name__}: {err}"))
    summary = summarize(oc.checks)
    complete = fatal is None and not oc.errors
    summary["complete"] = complete
    summary["all_passed"] = bool(summary["all_passed"] and complete)
    manifest = {
        "experiment": kind,
        "version": __version__,
        "config": jsonable(cfg),
        "files": files + ["report.txt", "manifest.json"],
        "wall_time_s": wall,
        "checks": [c.as_dict() for c in oc.checks],
        "errors": [{"index": e.index, "point": jsonable(e.point), "error": e.error} for e in oc.errors],
        "details": jsonable(oc.details),
        "summary": summary,
    }
    from .report import emit_report

    write_text_atomic(out / "report.txt", emit_report(manifest))
    write_json_atomic(out / "manifest.json", manifest)
    return manifest
