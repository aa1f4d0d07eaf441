"""Continuous inertial dynamics, a fixed-step RK4 integrator and iterate/time alignment.

All dynamics are integrated as first-order systems in ``(x, v)``. Forces:

==========  ==========================================================
hbf         ``-gamma v - grad f(x)``
hbf_sc      ``-2 sqrt(mu) v - grad f(x)``
avd         ``-(alpha/t) v - grad f(x)``
din_avd     ``-(alpha/t) v - beta H(x) v - b(t) grad f(x)``
isihd       ``-(alpha/t) v - grad f(x + (gamma + beta/t) v)``
highres     ``-(alpha/t) v - sqrt(s) H(x) v - (1 + alpha sqrt(s)/(2t)) grad f(x)``
==========  ==========================================================

``b(t)`` is 1 or ``1 + beta/t``; ``H(x) v`` is the Hessian-vector product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedError, HvpRequired
from .objective import SmoothProblem, hvp_or_fd
from .solvers import DIVERGENCE_BOUND, SolverConfig, Trace, run_nag, run_rag

KINDS = ("hbf", "hbf_sc", "avd", "din_avd", "isihd", "highres")
SINGULAR_KINDS = ("avd", "din_avd", "isihd", "highres")


@dataclass(frozen=True, eq=False)
class OdeSpec:
    kind: str
    x0: np.ndarray
    v0: np.ndarray | None = None
    alpha: float = 3.0
    beta: float = 0.0
    gamma: float = 0.0
    s: float = 0.0
    mu: float = 0.0
    b_kind: str = "one"
    t0: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ode kind {self.kind!r}; expected one of {KINDS}")
        if self.b_kind not in ("one", "one_plus_beta_over_t"):
            raise ValueError(f"unknown b_kind {self.b_kind!r}")
        x0 = np.array(self.x0, dtype=float).ravel()
        v0 = np.zeros_like(x0) if self.v0 is None else np.array(self.v0, dtype=float).ravel()
        if v0.shape != x0.shape:
            raise ValueError("x0 and v0 must have the same length")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)
        if self.kind in SINGULAR_KINDS and not self.t0 > 0:
            raise ValueError(f"{self.kind} has an alpha/t term; t0 must be positive")
        if min(self.beta, self.gamma, self.s, self.mu) < 0:
            raise ValueError("beta, gamma, s and mu must be nonnegative")


@dataclass(frozen=True, eq=False)
class OdeRun:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    objective: np.ndarray
    spec: OdeSpec | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "states", "velocities", "objective"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def force_field(problem: SmoothProblem, spec: OdeSpec, allow_fd: bool = True):
    """Return ``F(t, x, v)``, the acceleration of the dynamic described by ``spec``."""
    grad = problem.gradient
    a = spec.alpha
    needs_hvp = spec.kind == "highres" or (spec.kind == "din_avd" and spec.beta > 0)
    if needs_hvp and problem.hvp is None and not allow_fd:
        raise HvpRequired(f"{spec.kind} needs Hessian-vector products")

    def hvp(x, v):
        return hvp_or_fd(problem, x, v)

    kind = spec.kind
    if kind in ("hbf", "hbf_sc"):
        gamma = 2 * math.sqrt(spec.mu) if kind == "hbf_sc" else spec.gamma
        return lambda t, x, v: -gamma * v - grad(x)
    if kind == "avd":
        return lambda t, x, v: -(a / t) * v - grad(x)
    if kind == "din_avd":
        beta = spec.beta
        plus = spec.b_kind == "one_plus_beta_over_t"

        def din(t, x, v):
            b = 1 + beta / t if plus else 1.0
            out = -(a / t) * v - b * grad(x)
            return out - beta * hvp(x, v) if beta > 0 else out

        return din
    if kind == "isihd":
        gamma, beta = spec.gamma, spec.beta
        return lambda t, x, v: -(a / t) * v - grad(x + (gamma + beta / t) * v)
    h = math.sqrt(spec.s)
    return lambda t, x, v: -(a / t) * v - h * hvp(x, v) - (1 + a * h / (2 * t)) * grad(x)


def rk4_path(force, t0: float, x0, v0, dt: float, n: int):
    """Classical RK4 on ``x' = v, v' = force(t, x, v)``; returns ``(times, X, V)`` with ``n + 1`` rows."""
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    X = np.empty((n + 1, x.size))
    V = np.empty((n + 1, x.size))
    X[0], V[0] = x, v
    t = t0
    half = dt / 2
    for i in range(1, n + 1):
        a1 = force(t, x, v)
        x2, v2 = x + half * v, v + half * a1
        a2 = force(t + half, x2, v2)
        x3, v3 = x + half * v2, v + half * a2
        a3 = force(t + half, x3, v3)
        x4, v4 = x + dt * v3, v + dt * a3
        a4 = force(t + dt, x4, v4)
        x = x + (dt / 6) * (v + 2 * v2 + 2 * v3 + v4)
        v = v + (dt / 6) * (a1 + 2 * a2 + 2 * a3 + a4)
        t = t0 + i * dt
        X[i], V[i] = x, v
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))) or max(
            np.max(np.abs(x)), np.max(np.abs(v))
        ) > DIVERGENCE_BOUND:
            times = t0 + dt * np.arange(i + 1)
            raise DivergedError(f"trajectory blew up at t={t:g}", partial=(times, X[: i + 1], V[: i + 1]))
    return t0 + dt * np.arange(n + 1), X, V


def integrate(problem: SmoothProblem, spec: OdeSpec, t_end: float, dt: float, allow_fd: bool = True) -> OdeRun:
    """Integrate ``spec`` from ``spec.t0`` to (at least) ``t_end`` with fixed step ``dt``."""
    span = t_end - spec.t0
    if not span > 0:
        raise ValueError(f"t_end = {t_end} must exceed t0 = {spec.t0}")
    if not 0 < dt <= span / 10:
        raise ValueError(f"dt = {dt} must lie in (0, (t_end - t0)/10]")
    if spec.x0.size != problem.dim:
        raise ValueError(f"x0 has length {spec.x0.size}, problem has dim {problem.dim}")
    n = math.ceil(span / dt - 1e-9)
    force = force_field(problem, spec, allow_fd)
    try:
        times, X, V = rk4_path(force, spec.t0, spec.x0, spec.v0, dt, n)
    except DivergedError as err:
        times, X, V = err.partial
        f = np.array([problem.value(x) for x in X])
        raise DivergedError(str(err), partial=OdeRun(times, X, V, f, spec)) from None
    f = np.array([problem.value(x) for x in X])
    return OdeRun(times, X, V, f, spec)


# ------------------------------------------------------------------ alignment

ALIGN_RULES = ("nag_lowres", "rag_lowres", "nag_highres", "rag_highres")


def aligned_time(k, rule: str, alpha: float, s: float):
    """``t_k`` for iterate index ``k``: ``kh`` (low resolution), ``h(k - alpha/2)`` for
    NAG and ``h(k + 1 - alpha/2)`` for RAG at high resolution, with ``h = sqrt(s)``."""
    h = math.sqrt(s)
    k = np.asarray(k, dtype=float)
    if rule in ("nag_lowres", "rag_lowres"):
        return k * h
    if rule == "nag_highres":
        return h * (k - alpha / 2)
    if rule == "rag_highres":
        return h * (k + 1 - alpha / 2)
    raise ValueError(f"unknown alignment rule {rule!r}; expected one of {ALIGN_RULES}")


@dataclass(frozen=True, eq=False)
class Alignment:
    times: np.ndarray
    k: np.ndarray
    points: np.ndarray


def align_iterates(trace: Trace, scheme: str, s: float) -> Alignment:
    """Times of the trace's iterates (``x_k`` for NAG rules, ``y_k`` for RAG rules).

    Indices whose time is not positive are dropped together with their iterates.
    """
    t = aligned_time(trace.k, scheme, trace.alpha, s)
    pts = trace.x if scheme.startswith("nag") else trace.y
    if pts is None:
        raise ValueError(f"{trace.scheme} trace lacks the sequence needed by {scheme}")
    keep = t > 0
    return Alignment(t[keep], trace.k[keep], pts[keep])


# ------------------------------------------------------------ resolution gap


@dataclass(frozen=True)
class ResolutionGap:
    s: float
    lowres_err: float
    highres_err: float

    def __iter__(self):
        yield self.lowres_err
        yield self.highres_err


def resolution_gap(
    problem: SmoothProblem,
    alpha: float,
    s: float,
    horizon: float,
    which: str = "nag",
    x_init=None,
    t_start: float = 1.0,
    substeps: int = 20,
) -> ResolutionGap:
    """Sup-norm distance between the iterates and their low/high resolution ODEs.

    For each alignment the comparison starts at the first iterate whose time
    reaches ``t_start``. The ODE starts from that iterate with velocity
    ``(p_{k+1} - p_{k-1}) / (2h)``; a one-sided difference would itself be an
    ``O(h)`` error and mask the second-order agreement of the high resolution
    ODE. Each ODE is integrated with ``dt = h / substeps`` on a grid that hits
    every aligned iterate time over ``horizon``.
    """
    if which not in ("nag", "rag"):
        raise ValueError(f"which must be 'nag' or 'rag', got {which!r}")
    h = math.sqrt(s)
    if horizon / h > 1e6:
        raise ValueError("horizon / sqrt(s) exceeds 1e6 iterations")
    x_init = np.ones(problem.dim) if x_init is None else np.asarray(x_init, dtype=float)
    n = int(round(horizon / h))
    budget = int(math.ceil((t_start + horizon) / h + alpha)) + 4
    cfg = SolverConfig(alpha=alpha, step=s, max_iter=budget, x_init=x_init, force=True)
    trace = run_nag(problem, cfg) if which == "nag" else run_rag(problem, cfg)
    pts = trace.x if which == "nag" else trace.y
    errs = {}
    for res in ("lowres", "highres"):
        t = aligned_time(trace.k, f"{which}_{res}", alpha, s)
        i0 = int(np.argmax(t >= t_start - 1e-12))
        i0 = max(i0, 1)
        if i0 + n + 1 > len(pts):
            raise ValueError("trace too short for the requested horizon")
        v0 = (pts[i0 + 1] - pts[i0 - 1]) / (2 * h)
        spec = OdeSpec(
            kind="avd" if res == "lowres" else "highres",
            x0=pts[i0], v0=v0, alpha=alpha, s=s, t0=float(t[i0]),
        )
        force = force_field(problem, spec)
        _, X, _ = rk4_path(force, spec.t0, spec.x0, spec.v0, h / substeps, n * substeps)
        diff = X[::substeps] - pts[i0 : i0 + n + 1]
        errs[res] = float(np.max(np.linalg.norm(diff, axis=1)))
    return ResolutionGap(s, errs["lowres"], errs["highres"])
