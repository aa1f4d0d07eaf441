"""Experiment runner behind the ``ravine`` command.

A JSON config names one problem, a list of solver runs, a list of ODE
integrations, an optional resolution-gap table and the diagnostics to apply.
Every run writes one CSV; the invocation writes one ``report.json``.
See ``docs/report-schema.md`` for the report layout and ``configs/`` for samples.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    count_oscillations,
    energy_for,
    geometric_ratio,
    log_linear_slope,
    min_grad_series,
    rate_slope,
    summability,
)
from .dynamics import OdeSpec, integrate, resolution_gap
from .errors import ConfigError, DivergedError, InsufficientData, RavineError
from .objective import (
    QuadraticSpec,
    make_ill_conditioned_2d,
    make_least_squares,
    make_log_spectrum_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_zero,
)
from .prox import (
    STEP_TOL,
    CompositeProblem,
    make_lasso,
    make_log_spectrum_lasso,
    prox_box,
    prox_l1,
    prox_zero,
)
from .solvers import (
    SCHEMES,
    SolverConfig,
    max_iterate_norm,
    nag_rag_equivalence_residual,
    resolve_f_star,
    run_scheme,
)

log = logging.getLogger("ravine")

# acceptance thresholds
SLOPE_MAX = -1.8
SLOPE_WINDOW = (100, 10_000)
LATE_SLOPE_MAX = -2.0
LATE_WINDOW = (1_000, 10_000)
BASELINE_SLOPE_MIN = -1.3
MIN_GRAD_GROWTH = 10.0
EQUIVALENCE_TOL = 1e-11
ORDER_SEPARATION = 1.5

ACCELERATED = ("nag", "rag", "igahd", "fista", "rapg", "iprox", "iprox_full")
BASELINES = ("gd", "hb")
STRONGLY_CONVEX = ("sc_prox", "sc_nesterov", "sc_ravine")
WITH_ENERGY = ("nag", "fista", "rag", "rapg")

DIAGNOSTICS = {
    "energies": True,
    "summability": False,
    "slopes": False,
    "oscillations": False,
    "equivalence": False,
    "min_grad": False,
    "exp_rate": False,
}

PROBLEM_DEFAULT_START = {"log_spectrum": 0.0, "log_lasso": 0.0}


# ------------------------------------------------------------------ config


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key} is required")
    return d[key]


def _num(d: dict, key: str, where: str, default=None, positive=False, nonneg=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key} must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key} must be nonnegative, got {v!r}")
    return v


def build_g(spec: dict | None, dim: int):
    if spec is None:
        return None
    kind = _need(spec, "kind", "g")
    if kind == "l1":
        return prox_l1(_num(spec, "lambda", "g", nonneg=True))
    if kind == "zero":
        return prox_zero()
    if kind == "box":
        lo = np.broadcast_to(np.asarray(_need(spec, "lo", "g"), dtype=float), (dim,))
        hi = np.broadcast_to(np.asarray(_need(spec, "hi", "g"), dtype=float), (dim,))
        return prox_box(lo, hi)
    raise ConfigError(f"g.kind {kind!r} is not one of l1, box, zero")


def build_problem(config: dict):
    """Instantiate the problem described by ``config["problem"]`` (plus optional ``config["g"]``)."""
    spec = config.get("problem")
    if not isinstance(spec, dict):
        raise ConfigError("problem must be an object")
    kind = _need(spec, "kind", "problem")
    w = "problem"
    try:
        if kind == "quadratic":
            p = make_quadratic(QuadraticSpec(_need(spec, "matrix", w), _need(spec, "offset", w)))
        elif kind == "ill_conditioned_2d":
            p = make_ill_conditioned_2d(_num(spec, "condition", w))
        elif kind == "random_quadratic":
            p = make_random_quadratic(
                int(_num(spec, "dim", w, positive=True)), int(_num(spec, "seed", w, default=0)),
                spec.get("rank"),
            )
        elif kind == "log_spectrum":
            p = make_log_spectrum_quadratic(
                int(_num(spec, "dim", w, default=100)), _num(spec, "lam_min", w, default=1e-6),
                _num(spec, "lam_max", w, default=1.0),
            )
        elif kind == "least_squares":
            p = make_least_squares(_need(spec, "matrix", w), _need(spec, "rhs", w))
        elif kind == "zero":
            p = make_zero(int(_num(spec, "dim", w, positive=True)))
        elif kind == "lasso":
            p = make_lasso(
                int(_num(spec, "rows", w, default=10)), int(_num(spec, "dim", w, default=20)),
                _num(spec, "lambda", w, default=0.1), int(_num(spec, "seed", w, default=0)),
            )
        elif kind == "log_lasso":
            p = make_log_spectrum_lasso(
                int(_num(spec, "dim", w, default=20)), _num(spec, "lambda", w, default=1e-3),
                _num(spec, "curvature_min", w, default=1e-6),
            )
        else:
            raise ConfigError(f"problem.kind {kind!r} is not supported")
    except RavineError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"problem: {err}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f"problem: {err}") from err
    g = build_g(config.get("g"), p.dim)
    if g is not None:
        if isinstance(p, CompositeProblem):
            raise ConfigError(f"g cannot be combined with problem.kind {kind!r}")
        p = CompositeProblem(
            p, g, theta_min=p.min_value if g.is_zero else None, name=f"{p.name}+{g.kind}",
            minimizer=p.minimizer if g.is_zero else None,
        )
    return p


def _vector(value, dim: int, where: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.full(dim, float(a))
    if a.shape != (dim,):
        raise ConfigError(f"{where} has length {a.size}, problem has dim {dim}")
    return a


@dataclass
class SolverEntry:
    index: int
    label: str
    name: str
    cfg: SolverConfig


@dataclass
class OdeEntry:
    index: int
    label: str
    spec: OdeSpec
    t_end: float
    dt: float


@dataclass
class Experiment:
    raw: dict
    problem: object
    solvers: list[SolverEntry]
    odes: list[OdeEntry]
    resolution: dict | None
    diagnostics: dict
    out: Path


def _unique_labels(labels):
    seen: dict[str, int] = {}
    out = []
    for lab in labels:
        n = seen.get(lab, 0)
        seen[lab] = n + 1
        out.append(lab if n == 0 else f"{lab}_{n + 1}")
    return out


def parse_experiment(config: dict, force: bool = False, out: str | None = None) -> Experiment:
    """Validate ``config`` and build every object an experiment needs.

    Step sizes are checked here so a bad config fails before anything runs.
    """
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    problem = build_problem(config)
    dim = problem.dim
    L = problem.lipschitz
    kind = config["problem"]["kind"]
    start = PROBLEM_DEFAULT_START.get(kind, 1.0)

    raw_solvers = config.get("solvers", [])
    raw_odes = config.get("ode", [])
    if isinstance(raw_odes, dict):
        raw_odes = [raw_odes]
    if not isinstance(raw_solvers, list) or not isinstance(raw_odes, list):
        raise ConfigError("solvers and ode must be lists")
    if not raw_solvers and not raw_odes and "resolution" not in config:
        raise ConfigError("config needs at least one solvers or ode entry")

    labels = _unique_labels(
        [str(s.get("label", s.get("name", "solver"))) for s in raw_solvers]
        + [str(o.get("label", o.get("kind", "ode"))) for o in raw_odes]
    )
    solvers = []
    for i, s in enumerate(raw_solvers):
        where = f"solvers[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(f"{where} must be an object")
        name = _need(s, "name", where)
        if name not in SCHEMES:
            raise ConfigError(f"{where}.name {name!r} is not one of {', '.join(SCHEMES)}")
        if "step" in s and "sL" in s:
            raise ConfigError(f"{where}: give either step or sL, not both")
        if "sL" in s:
            step = _num(s, "sL", where, positive=True) / L
        else:
            step = _num(s, "step", where, positive=True)
        entry_force = force or bool(s.get("force", False))
        if step * L > 1 + STEP_TOL and not entry_force:
            raise ConfigError(
                f"{where} ({name}): step.lipschitz = {step * L:.6g} exceeds 1; pass --force to override"
            )
        mu = _num(s, "mu", where, default=-1.0)
        if name in STRONGLY_CONVEX and mu < 0:
            mu = getattr(problem, "strong_convexity", 0.0) or getattr(
                getattr(problem, "smooth", None), "strong_convexity", 0.0
            )
        beta = _num(s, "beta", where, default=0.0, nonneg=True)
        if name == "igahd" and beta != 0 and not beta < 2 * math.sqrt(step) and not entry_force:
            raise ConfigError(
                f"{where}.beta = {beta:g} must be below 2 sqrt(step) = {2 * math.sqrt(step):.6g}; "
                "pass --force to override"
            )
        try:
            cfg = SolverConfig(
                alpha=_num(s, "alpha", where, default=3.0, nonneg=True),
                step=step,
                max_iter=int(_num(s, "max_iter", where, positive=True)),
                x_init=_vector(s.get("x_init", start), dim, f"{where}.x_init"),
                beta=beta,
                mu=max(mu, 0.0),
                k_start=int(_num(s, "k_start", where, default=1, positive=True)),
                momentum=_num(s, "momentum", where, default=0.0, nonneg=True),
                force=entry_force,
                f_star=s.get("f_star"),
            )
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"{where}: {err}") from err
        solvers.append(SolverEntry(i, labels[i], name, cfg))

    odes = []
    for j, o in enumerate(raw_odes):
        where = f"ode[{j}]"
        if not isinstance(o, dict):
            raise ConfigError(f"{where} must be an object")
        if isinstance(problem, CompositeProblem):
            raise ConfigError(f"{where}: dynamics need a smooth problem")
        try:
            spec = OdeSpec(
                kind=_need(o, "kind", where),
                x0=_vector(o.get("x0", start), dim, f"{where}.x0"),
                v0=_vector(o.get("v0", 0.0), dim, f"{where}.v0"),
                alpha=_num(o, "alpha", where, default=3.0),
                beta=_num(o, "beta", where, default=0.0, nonneg=True),
                gamma=_num(o, "gamma", where, default=0.0, nonneg=True),
                s=_num(o, "s", where, default=0.0, nonneg=True),
                mu=_num(o, "mu", where, default=0.0, nonneg=True),
                b_kind=o.get("b_kind", "one"),
                t0=_num(o, "t0", where, default=1.0),
            )
        except ValueError as err:
            raise ConfigError(f"{where}: {err}") from err
        t_end = _num(o, "t_end", where)
        dt = _num(o, "dt", where, positive=True)
        if not t_end > spec.t0 or dt > (t_end - spec.t0) / 10:
            raise ConfigError(f"{where}: need t_end > t0 and dt <= (t_end - t0)/10")
        odes.append(OdeEntry(j, labels[len(raw_solvers) + j], spec, t_end, dt))

    resolution = config.get("resolution")
    if resolution is not None:
        if isinstance(problem, CompositeProblem):
            raise ConfigError("resolution: needs a smooth problem")
        s_values = resolution.get("s", [1e-2, 2.5e-3])
        which = resolution.get("which", ["nag", "rag"])
        which = [which] if isinstance(which, str) else which
        if not s_values or any(not isinstance(v, (int, float)) or v <= 0 for v in s_values):
            raise ConfigError("resolution.s must be a list of positive numbers")
        if any(w not in ("nag", "rag") for w in which):
            raise ConfigError("resolution.which entries must be nag or rag")
        resolution = {
            "alpha": _num(resolution, "alpha", "resolution", default=3.0),
            "horizon": _num(resolution, "horizon", "resolution", default=5.0, positive=True),
            "s": [float(v) for v in s_values],
            "which": list(which),
            "x_init": _vector(resolution.get("x_init", start), dim, "resolution.x_init").tolist(),
        }

    diag = dict(DIAGNOSTICS)
    for key, val in config.get("diagnostics", {}).items():
        if key not in DIAGNOSTICS:
            raise ConfigError(f"diagnostics.{key} is not one of {', '.join(DIAGNOSTICS)}")
        diag[key] = bool(val)
    out_dir = Path(out or config.get("output", "ravine-out"))
    return Experiment(config, problem, solvers, odes, resolution, diag, out_dir)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ------------------------------------------------------------------ verdicts


def verdict(name, subject, passed, measured, threshold, detail=""):
    return {
        "name": name,
        "subject": subject,
        "status": "PASS" if passed else "FAIL",
        "measured": measured,
        "threshold": threshold,
        "detail": detail,
    }


def skipped(name, subject, detail):
    return {"name": name, "subject": subject, "status": "SKIP", "measured": None, "threshold": None, "detail": detail}


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


# ------------------------------------------------------------------ CSV


def write_csv(path: Path, header: list[str], columns: list[np.ndarray], int_first: bool = True) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    fmt = (["%d"] if int_first else ["%.17g"]) + ["%.17g"] * (data.shape[1] - 1)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=fmt, delimiter=",")


def trace_columns(trace, energy=None, sums=None):
    header, cols = ["k"], [trace.k]
    for name in ("x", "y", "w"):
        a = getattr(trace, name)
        if a is not None:
            header += [f"{name}{i}" for i in range(a.shape[1])]
            cols += list(a.T)
    header += ["gap", "grad_norm", "step_norm"]
    cols += [trace.gap, trace.grad_norm, trace.step_norm]
    if energy is not None:
        header.append("E")
        cols.append(energy)
    for name, values in (sums or {}).items():
        header.append(name)
        cols.append(values)
    return header, cols


# ------------------------------------------------------------------ solver runs


def _solver_job(payload):
    """Run one solver entry; executed in-process or in a worker process."""
    config, index, force, out, f_star = payload
    exp = parse_experiment(config, force=force, out=out)
    entry = exp.solvers[index]
    return execute_solver(exp, entry, f_star)


def _energy_column(exp: Experiment, entry: SolverEntry, trace):
    """Energy values aligned to trace rows (NaN where undefined) and a verdict."""
    subject = entry.label
    anchor = getattr(exp.problem, "minimizer", None)
    if entry.name not in WITH_ENERGY:
        return None, None
    if anchor is None:
        return np.full(len(trace), np.nan), skipped("energy_monotone", subject, "problem has no known minimizer")
    series = energy_for(trace, anchor)
    column = np.full(len(trace), np.nan)
    column[np.searchsorted(trace.k, series.k)] = series.values
    sl = entry.cfg.step * exp.problem.lipschitz
    strict = entry.name in ("rag", "rapg")
    if entry.cfg.alpha < 3 or sl > 1 + STEP_TOL or (strict and sl >= 1):
        return column, skipped("energy_monotone", subject, "needs alpha >= 3 and sL <= 1 (< 1 for ravine schemes)")
    v = verdict(
        "energy_monotone", subject, series.monotone, series.max_increase, series.slack,
        f"{series.kind} max increase over k >= {series.check_from}",
    )
    return column, v


def execute_solver(exp: Experiment, entry: SolverEntry, f_star: float | None) -> dict:
    diag = exp.diagnostics
    cfg = entry.cfg
    if cfg.f_star is None and f_star is not None:
        cfg = replace(cfg, f_star=f_star)
    record = {
        "label": entry.label,
        "kind": "solver",
        "scheme": entry.name,
        "alpha": cfg.alpha,
        "step": cfg.step,
        "max_iter": cfg.max_iter,
        "csv": f"{entry.label}.csv",
        "status": "ok",
        "message": "",
        "diagnostics": {},
    }
    verdicts = []
    try:
        trace = run_scheme(entry.name, exp.problem, cfg)
    except DivergedError as err:
        record.update(status="diverged", message=str(err))
        trace = err.partial
        verdicts.append(verdict("finite", entry.label, False, None, None, str(err)))
    except RavineError as err:
        record.update(status="error", message=str(err), csv=None)
        return {"record": record, "verdicts": verdicts}
    if trace is None or len(trace) == 0:
        record["csv"] = None
        return {"record": record, "verdicts": verdicts}

    record["n_rows"] = len(trace)
    record["f_star"] = trace.f_star
    record["final_gap"] = _finite(trace.gap[-1])
    record["final_grad_norm"] = _finite(trace.grad_norm[-1])
    ok = record["status"] == "ok"

    energy = None
    if diag["energies"]:
        energy, v = _energy_column(exp, entry, trace)
        if v is not None and ok:
            verdicts.append(v)
            record["diagnostics"]["energy_max_increase"] = v["measured"]

    sums = {}
    if diag["summability"]:
        k = trace.k.astype(float)
        sums["sum_k2_grad2"] = np.cumsum(k * k * trace.grad_norm**2)
        sums["sum_k_gap"] = np.cumsum(k * np.nan_to_num(trace.gap, nan=0.0))
        if ok and entry.name in ACCELERATED:
            weights = ["k2_gradsq"] + (["k_gap"] if cfg.alpha > 3 else [])
            for weight in weights:
                try:
                    rep = summability(trace, weight)
                except InsufficientData as err:
                    verdicts.append(skipped(f"summability_{weight}", entry.label, str(err)))
                    continue
                record["diagnostics"][f"tail_ratio_{weight}"] = rep.tail_ratio
                verdicts.append(verdict(
                    f"summability_{weight}", entry.label, rep.passed, rep.tail_ratio, 0.2,
                    f"(S_2K - S_K)/S_K at K={rep.K}",
                ))

    if diag["slopes"] and ok:
        verdicts += _slope_verdicts(entry, cfg, trace, record)

    if diag["min_grad"] and ok and entry.name in ACCELERATED:
        k, stat = min_grad_series(trace)
        sel = (k >= 100) & (k <= 10_000)
        if np.any(k == 100) and np.count_nonzero(sel) > 1:
            base = float(stat[k == 100][0])
            growth = float(np.max(stat[sel]) / base) if base > 0 else 0.0
            record["diagnostics"]["min_grad_growth"] = growth
            verdicts.append(verdict("min_grad_bounded", entry.label, growth <= MIN_GRAD_GROWTH, growth,
                                    MIN_GRAD_GROWTH, "max k^3 min|grad|^2 over [100, 1e4] / value at k=100"))
        else:
            verdicts.append(skipped("min_grad_bounded", entry.label, "trace does not cover k = 100"))

    if diag["oscillations"]:
        record["diagnostics"]["oscillations"] = count_oscillations(trace.gap) if len(trace) >= 3 else 0

    header, cols = trace_columns(trace, energy, sums)
    write_csv(exp.out / record["csv"], header, cols)
    return {"record": record, "verdicts": verdicts}


def _slope_verdicts(entry, cfg, trace, record):
    out = []
    name = entry.name
    if name in STRONGLY_CONVEX:
        limit = 1 - 0.5 * math.sqrt(cfg.mu * cfg.step)
        try:
            ratio = geometric_ratio(trace.k, trace.gap)
        except InsufficientData as err:
            return [skipped("geometric_rate", entry.label, str(err))]
        record["diagnostics"]["geometric_ratio"] = ratio
        return [verdict("geometric_rate", entry.label, ratio <= limit, ratio, limit,
                        "fitted per-iteration contraction of the gap")]
    rules = []
    if name in ACCELERATED:
        rules.append(("rate_slope", SLOPE_WINDOW, lambda v: v <= SLOPE_MAX, SLOPE_MAX, "slope <= threshold"))
        if cfg.alpha > 3:
            rules.append(("rate_slope_late", LATE_WINDOW, lambda v: v <= LATE_SLOPE_MAX, LATE_SLOPE_MAX,
                          "slope <= threshold (alpha > 3)"))
    elif name in BASELINES:
        rules.append(("baseline_slope", SLOPE_WINDOW, lambda v: v >= BASELINE_SLOPE_MIN, BASELINE_SLOPE_MIN,
                      "slope >= threshold (no acceleration)"))
    for vname, (lo, hi), ok, thr, text in rules:
        try:
            rep = rate_slope(trace.k, trace.gap, lo, hi)
        except InsufficientData as err:
            out.append(skipped(vname, entry.label, str(err)))
            continue
        record["diagnostics"][vname] = rep.to_dict()
        out.append(verdict(vname, entry.label, ok(rep.slope), rep.slope, thr, f"{text} over k in [{lo}, {hi}]"))
    return out


# ------------------------------------------------------------------ ODE runs


def execute_ode(exp: Experiment, entry: OdeEntry) -> dict:
    spec = entry.spec
    record = {
        "label": entry.label,
        "kind": "ode",
        "scheme": spec.kind,
        "alpha": spec.alpha,
        "csv": f"{entry.label}.csv",
        "status": "ok",
        "message": "",
        "diagnostics": {},
    }
    verdicts = []
    try:
        run = integrate(exp.problem, spec, entry.t_end, entry.dt)
    except DivergedError as err:
        record.update(status="diverged", message=str(err))
        run = err.partial
        verdicts.append(verdict("finite", entry.label, False, None, None, str(err)))
    except RavineError as err:
        record.update(status="error", message=str(err), csv=None)
        return {"record": record, "verdicts": verdicts}
    record["n_rows"] = len(run.times)
    record["final_f"] = _finite(run.objective[-1])
    if exp.diagnostics["oscillations"] and len(run.objective) >= 3:
        record["diagnostics"]["oscillations"] = count_oscillations(run.objective)
    if exp.diagnostics["exp_rate"] and spec.kind == "hbf_sc" and record["status"] == "ok":
        f_star = exp.problem.min_value
        if f_star is None:
            verdicts.append(skipped("exp_rate", entry.label, "problem has no known minimum"))
        else:
            rate = -math.sqrt(spec.mu) + 0.1
            try:
                rep = log_linear_slope(run.times, run.objective - f_star)
                record["diagnostics"]["exp_rate"] = rep.to_dict()
                verdicts.append(verdict("exp_rate", entry.label, rep.slope <= rate, rep.slope, rate,
                                        "slope of ln(f - f*) per unit time"))
            except InsufficientData as err:
                verdicts.append(skipped("exp_rate", entry.label, str(err)))
    d = run.states.shape[1]
    header = ["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["f"]
    cols = [run.times, *run.states.T, *run.velocities.T, run.objective]
    write_csv(exp.out / record["csv"], header, cols, int_first=False)
    return {"record": record, "verdicts": verdicts}


def execute_resolution(exp: Experiment) -> dict:
    res = exp.resolution
    rows = []
    verdicts = []
    for which in res["which"]:
        for s in res["s"]:
            gap = resolution_gap(exp.problem, res["alpha"], s, res["horizon"], which, x_init=res["x_init"])
            rows.append({"which": which, "s": s, "lowres_err": gap.lowres_err, "highres_err": gap.highres_err})
            verdicts.append(verdict("highres_closer", f"{which}@s={s:g}", gap.highres_err < gap.lowres_err,
                                    gap.highres_err, gap.lowres_err, "highres_err < lowres_err"))
        mine = [r for r in rows if r["which"] == which]
        if len(mine) >= 2:
            a, b = mine[0], mine[-1]
            low_c = a["lowres_err"] / b["lowres_err"]
            high_c = a["highres_err"] / b["highres_err"]
            sep = high_c / low_c
            verdicts.append(verdict("order_separation", which, sep >= ORDER_SEPARATION, sep, ORDER_SEPARATION,
                                    f"highres contraction {high_c:.3g} / lowres contraction {low_c:.3g}"))
    header = ["which", "s", "lowres_err", "highres_err"]
    with open(exp.out / "resolution.csv", "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(f"{r['which']},{r['s']:.17g},{r['lowres_err']:.17g},{r['highres_err']:.17g}\n")
    record = {"label": "resolution", "kind": "resolution", "scheme": "resolution_gap", "csv": "resolution.csv",
              "status": "ok", "message": "", "diagnostics": {"table": rows}}
    return {"record": record, "verdicts": verdicts}


# ------------------------------------------------------------------ pairs


def _pair_oscillations(entries, records, lesser, greater, name):
    """Verdict that the first run of ``lesser`` oscillates less than the first of ``greater``."""
    def count(kind):
        for e, r in zip(entries, records):
            if e == kind and "oscillations" in r["diagnostics"]:
                return r["label"], r["diagnostics"]["oscillations"]
        return None

    a, b = count(lesser), count(greater)
    if a is None or b is None:
        return []
    return [verdict(name, f"{a[0]} vs {b[0]}", a[1] < b[1], a[1], b[1], f"count({a[0]}) < count({b[0]})")]


def equivalence_verdicts(exp: Experiment) -> list[dict]:
    for entry in exp.solvers:
        if entry.name in ("nag", "rag"):
            r1, r2 = nag_rag_equivalence_residual(exp.problem, entry.cfg)
            scale = 1 + max_iterate_norm(run_scheme("nag", exp.problem, entry.cfg))
            tol = EQUIVALENCE_TOL * scale
            return [
                verdict("equivalence_nag_to_rag", entry.label, r1 <= tol, r1, tol, "RAG recursion on NAG iterates"),
                verdict("equivalence_rag_to_nag", entry.label, r2 <= tol, r2, tol, "NAG recursion on RAG iterates"),
            ]
    return [skipped("equivalence", "-", "needs a nag or rag solver entry")]


# ------------------------------------------------------------------ driver


def _map(fn, payloads, jobs):
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, payloads))
    return [fn(p) for p in payloads]


def _ode_job(payload):
    config, index, force, out = payload
    exp = parse_experiment(config, force=force, out=out)
    return execute_ode(exp, exp.odes[index])


def run_experiment(config: dict, command: str = "run", force: bool = False, out: str | None = None,
                   jobs: int = 1) -> tuple[int, dict]:
    """Execute ``config``; returns ``(exit_code, report)`` and writes CSVs plus ``report.json``."""
    exp = parse_experiment(config, force=force, out=out)
    if command == "compare" and len(exp.solvers) < 2:
        raise ConfigError("compare needs at least two solvers entries")
    if command == "ode" and not exp.odes and exp.resolution is None:
        raise ConfigError("ode needs at least one ode entry or a resolution block")
    exp.out.mkdir(parents=True, exist_ok=True)
    out_str = str(exp.out)

    results = []
    if command in ("run", "compare") and exp.solvers:
        f_star = None
        needs = any(e.cfg.f_star is None for e in exp.solvers)
        if needs:
            f_star = resolve_f_star(exp.problem)
        payloads = [(config, e.index, force, out_str, f_star) for e in exp.solvers]
        log.info("running %d solver entries with %d job(s)", len(payloads), jobs)
        results += _map(_solver_job, payloads, jobs)
    solver_records = [r["record"] for r in results]
    if command in ("run", "ode"):
        results += _map(_ode_job, [(config, e.index, force, out_str) for e in exp.odes], jobs)
        if exp.resolution is not None:
            results.append(execute_resolution(exp))

    runs = [r["record"] for r in results]
    verdicts = [v for r in results for v in r["verdicts"]]
    if exp.diagnostics["oscillations"]:
        verdicts += _pair_oscillations([e.name for e in exp.solvers], solver_records, "igahd", "nag",
                                       "fewer_oscillations")
        ode_records = [r for r in runs if r["kind"] == "ode"]
        verdicts += _pair_oscillations([e.spec.kind for e in exp.odes], ode_records, "din_avd", "avd",
                                       "fewer_oscillations")
    if exp.diagnostics["equivalence"] and command in ("run", "compare"):
        verdicts += equivalence_verdicts(exp)

    report = {
        "config_hash": config_hash(config),
        "metadata": {
            "command": command,
            "ravine_version": __version__,
            "numpy_version": np.__version__,
            "problem": exp.problem.name,
            "seed": config["problem"].get("seed"),
            "rng": "numpy.random.default_rng (PCG64)",
            "force": force,
        },
        "runs": runs,
        "verdicts": verdicts,
    }
    if command == "compare":
        report["comparison"] = comparison_table(runs)
    with open(exp.out / "report.json", "w") as fh:
        json.dump(_sanitize(report), fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")

    if any(r["status"] != "ok" for r in runs):
        code = 1
    elif any(v["status"] == "FAIL" for v in verdicts):
        code = 2
    else:
        code = 0
    return code, report


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def comparison_table(runs: list[dict]) -> list[dict]:
    """One row per solver with the headline numbers side by side."""
    rows = []
    for r in runs:
        if r["kind"] != "solver":
            continue
        d = r["diagnostics"]
        rows.append({
            "label": r["label"],
            "scheme": r["scheme"],
            "alpha": r["alpha"],
            "final_gap": r.get("final_gap"),
            "slope": d.get("rate_slope", d.get("baseline_slope", {})).get("slope"),
            "late_slope": d.get("rate_slope_late", {}).get("slope"),
            "geometric_ratio": d.get("geometric_ratio"),
            "tail_ratio_k2_gradsq": d.get("tail_ratio_k2_gradsq"),
            "tail_ratio_k_gap": d.get("tail_ratio_k_gap"),
            "oscillations": d.get("oscillations"),
            "energy_max_increase": d.get("energy_max_increase"),
        })
    return rows


def _sanitize(report):
    """Replace non-finite floats by None so the report stays strict JSON."""
    if isinstance(report, dict):
        return {k: _sanitize(v) for k, v in report.items()}
    if isinstance(report, list):
        return [_sanitize(v) for v in report]
    if isinstance(report, float) and not math.isfinite(report):
        return None
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ravine", description="Run accelerated-gradient experiments.")
    parser.add_argument("--force", action="store_true", help="skip the step.lipschitz <= 1 and beta checks")
    parser.add_argument("--out", help="output directory (overrides config.output)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run every solver, ODE and resolution entry"),
        ("compare", "run two or more solvers and tabulate them side by side"),
        ("ode", "integrate ODE entries and the resolution-gap table"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--force", action="store_true", default=argparse.SUPPRESS)
        p.add_argument("--out", default=argparse.SUPPRESS)
        p.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 1
    try:
        code, report = run_experiment(config, args.command, force=args.force, out=args.out, jobs=args.jobs)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except RavineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for r in report["runs"]:
        if r["status"] != "ok":
            print(f"{r['label']}: {r['status']}: {r['message']}", file=sys.stderr)
    for v in report["verdicts"]:
        measured = v["measured"]
        shown = f"{measured:.6g}" if isinstance(measured, float) else measured
        print(f"{v['status']:4} {v['name']:24} {v['subject']:24} measured={shown} threshold={v['threshold']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
