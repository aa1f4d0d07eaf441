"""Discrete accelerated schemes sharing one configuration type and one trace format.

Index conventions
-----------------
Every run starts at ``k = k_start`` and records ``max_iter + 1`` rows, one per
index ``k_start, ..., k_start + max_iter``. Two-step schemes duplicate the start
point (``x_{k_start - 1} = x_{k_start}``), i.e. they start with zero velocity.

* NAG-ordered schemes (``nag``, ``igahd``, ``fista``, inertial prox, ``sc_*``
  except ravine, ``gd``, ``hb``) record ``x_k`` as main iterate, ``y_k`` the
  extrapolated point computed at step ``k``, the gap at ``x_k`` and the gradient
  (or prox-gradient) norm at ``x_k``.
* Ravine-ordered schemes (``rag``, ``rapg``, ``sc_ravine``) record ``y_k`` and
  ``w_k = y_k - s grad f(y_k)``. ``y_{k+1}`` uses the coefficient
  ``1 - alpha/(k+1)``. ``w_{k_start - 1}`` defaults to ``w_{k_start}``; pass
  ``w_prev`` to seed it differently (``w_prev = x_init`` reproduces the
  NAG/FISTA sequence exactly, shifted by one index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BetaOutOfRange, DivergedError, MuRequired, StepTooLarge
from .objective import SmoothProblem
from .prox import STEP_TOL, CompositeProblem, prox_gradient_point, prox_zero, resolvent

DIVERGENCE_BOUND = 1e100

SCHEMES = (
    "nag", "rag", "igahd", "iprox", "iprox_full", "rapg", "fista",
    "sc_prox", "sc_nesterov", "sc_ravine", "gd", "hb",
)
RAVINE_SCHEMES = ("rag", "rapg", "sc_ravine")


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    step: float
    max_iter: int
    x_init: np.ndarray
    beta: float = 0.0
    mu: float = 0.0
    k_start: int = 1
    momentum: float = 0.0
    force: bool = False
    monitor_energy: bool = False
    f_star: float | None = None

    def __post_init__(self):
        x = np.array(self.x_init, dtype=float).ravel()
        x.flags.writeable = False
        object.__setattr__(self, "x_init", x)
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if int(self.k_start) != self.k_start or self.k_start < 1:
            raise ValueError(f"k_start must be a positive integer, got {self.k_start}")
        if self.beta < 0 or self.mu < 0:
            raise ValueError("beta and mu must be nonnegative")


@dataclass(frozen=True, eq=False)
class Trace:
    """Immutable per-iteration record of one run.

    Array fields have one row per recorded index ``k``. ``x`` or ``w`` is
    ``None`` when the scheme has no such sequence. ``main`` names the sequence
    the gap refers to. ``energy`` is filled by :mod:`ravine.diagnostics`.
    """

    scheme: str
    k: np.ndarray
    x: np.ndarray | None
    y: np.ndarray | None
    w: np.ndarray | None
    gap: np.ndarray
    grad_norm: np.ndarray
    step_norm: np.ndarray
    alpha: float
    step: float
    main: str
    f_star: float
    energy: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("k", "x", "y", "w", "gap", "grad_norm", "step_norm", "energy"):
            a = getattr(self, name)
            if a is not None:
                a = np.array(a)
                a.flags.writeable = False
                object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.k)

    @property
    def iterates(self) -> np.ndarray:
        return getattr(self, self.main)

    @property
    def dim(self) -> int:
        return self.iterates.shape[1]

    def with_energy(self, energy) -> Trace:
        return replace(self, energy=np.asarray(energy, dtype=float))


def _check_step(problem, cfg: SolverConfig, strict: bool = False) -> None:
    sl = cfg.step * problem.lipschitz
    if cfg.force:
        return
    if sl > 1 + STEP_TOL:
        raise StepTooLarge(f"step.lipschitz = {sl:.6g} exceeds 1 (use force to override)")
    if strict and cfg.monitor_energy and sl >= 1:
        raise StepTooLarge(
            f"step.lipschitz = {sl:.6g}; the energy monitor needs it strictly below 1"
        )


def _as_composite(problem) -> CompositeProblem:
    if isinstance(problem, CompositeProblem):
        return problem
    return CompositeProblem(
        problem, prox_zero(), theta_min=problem.min_value, name=problem.name, minimizer=problem.minimizer
    )


def _smooth(problem) -> SmoothProblem:
    return problem.smooth if isinstance(problem, CompositeProblem) else problem


def _objective(problem):
    return problem.theta if isinstance(problem, CompositeProblem) else problem.value


def resolve_f_star(problem, cfg: SolverConfig | None = None) -> float:
    """``f*`` (or ``theta*``) from the config override, the problem, or a reference run."""
    if cfg is not None and cfg.f_star is not None:
        return float(cfg.f_star)
    known = problem.theta_min if isinstance(problem, CompositeProblem) else problem.min_value
    if known is not None:
        return float(known)
    from .diagnostics import estimate_min

    return estimate_min(problem)


def _start(problem, cfg: SolverConfig) -> np.ndarray:
    x = cfg.x_init.copy()
    if x.shape != (problem.dim,):
        raise ValueError(f"x_init has length {x.size}, problem has dim {problem.dim}")
    return x


class _Recorder:
    """Accumulates rows and aborts on non-finite or exploding values."""

    def __init__(self, scheme, cfg, f_star, objective, main, sequences):
        self.scheme, self.cfg, self.f_star = scheme, cfg, f_star
        self.objective, self.main = objective, main
        self.rows = {name: [] for name in sequences}
        self.k, self.gap, self.grad_norm, self.step_norm = [], [], [], []
        self.extra: dict[str, list] = {}

    def add(self, k, gap_point, grad_norm, step_norm, **points):
        # validate everything first so a partial trace never has ragged columns
        for name, p in points.items():
            if name in self.rows:
                self._guard(k, name, p)
        if not math.isfinite(grad_norm) or grad_norm > DIVERGENCE_BOUND:
            self._diverge(k, f"gradient norm {grad_norm!r}")
        for name, p in points.items():
            if name in self.rows:
                self.rows[name].append(p)
            else:
                self.extra.setdefault(name, []).append(p)
        v = self.objective(gap_point)
        self.k.append(k)
        self.gap.append(v - self.f_star if math.isfinite(v) else math.nan)
        self.grad_norm.append(grad_norm)
        self.step_norm.append(step_norm)

    def _guard(self, k, name, p):
        n = float(np.linalg.norm(p))
        if not math.isfinite(n) or n > DIVERGENCE_BOUND:
            self._diverge(k, f"|{name}| = {n!r}")

    def _diverge(self, k, what):
        raise DivergedError(f"{self.scheme} diverged at k={k}: {what}", partial=self.build())

    def build(self) -> Trace:
        def stack(rows):
            return np.array(rows, dtype=float) if rows else None

        seqs = {name: stack(rows) for name, rows in self.rows.items()}
        return Trace(
            scheme=self.scheme,
            k=np.array(self.k, dtype=int),
            x=seqs.get("x"),
            y=seqs.get("y"),
            w=seqs.get("w"),
            gap=np.array(self.gap, dtype=float),
            grad_norm=np.array(self.grad_norm, dtype=float),
            step_norm=np.array(self.step_norm, dtype=float),
            alpha=float(self.cfg.alpha),
            step=float(self.cfg.step),
            main=self.main,
            f_star=float(self.f_star),
            extra={k: np.array(v, dtype=float) for k, v in self.extra.items()},
        )


def _norm(v) -> float:
    return float(np.linalg.norm(v))


# ---------------------------------------------------------------- NAG family


def _nag_like(problem, cfg, scheme, correction=None, prox_step=None):
    """Shared loop of NAG, IGAHD and FISTA-like.

    ``correction(k, g, g_prev)`` returns the vector subtracted from the
    extrapolated point (IGAHD). ``prox_step`` switches the gradient step to
    the prox-gradient step of a composite problem.
    """
    _check_step(problem, cfg)
    smooth = _smooth(problem)
    grad = smooth.gradient
    s, alpha = cfg.step, cfg.alpha
    f_star = resolve_f_star(problem, cfg)
    rec = _Recorder(scheme, cfg, f_star, _objective(problem), "x", ("x", "y"))
    x = _start(problem, cfg)
    x_prev = x
    g_prev = grad(x) if correction is not None else None
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        if prox_step is None:
            gx = grad(x)
        else:
            gx = prox_step(s, x)[1]
        y = x + (1 - alpha / k) * (x - x_prev)
        if correction is not None:
            y = y - correction(k, gx, g_prev)
        extra = {}
        if correction is not None:
            extra["grad_norm_y"] = _norm(grad(y))
        rec.add(k, x, _norm(gx), _norm(x - x_prev), x=x, y=y, **extra)
        if it == cfg.max_iter:
            break
        if prox_step is None:
            x_next = y - s * grad(y)
        else:
            x_next = prox_step(s, y)[0]
        x_prev, x, g_prev = x, x_next, gx
        k += 1
    return rec.build()


def run_nag(problem: SmoothProblem, cfg: SolverConfig) -> Trace:
    """``y_k = x_k + (1 - alpha/k)(x_k - x_{k-1})``, ``x_{k+1} = y_k - s grad f(y_k)``."""
    return _nag_like(problem, cfg, "nag")


def run_igahd(problem: SmoothProblem, cfg: SolverConfig) -> Trace:
    """NAG with the gradient-difference correction of Hessian-driven damping.

    ``beta = 0`` is accepted and reproduces :func:`run_nag` bit for bit.
    Otherwise ``0 < beta < 2 sqrt(s)`` is required unless ``cfg.force``.
    """
    c = cfg.beta * math.sqrt(cfg.step)
    if cfg.beta != 0 and not cfg.beta < 2 * math.sqrt(cfg.step) and not cfg.force:
        raise BetaOutOfRange(
            f"beta = {cfg.beta:g} must lie in (0, 2 sqrt(s)) = (0, {2 * math.sqrt(cfg.step):.6g})"
        )

    # g_prev is grad f(x_{k-1}); at k_start it equals grad f(x_{k_start})
    def correction(k, g, g_prev):
        return c * (g - g_prev) + (c / k) * g_prev

    return _nag_like(problem, cfg, "igahd", correction=correction)


def run_fista_like(problem, cfg: SolverConfig) -> Trace:
    """NAG ordering with a prox-gradient step; records ``theta(x_k)`` and ``|T_s(x_k)|``."""
    comp = _as_composite(problem)
    return _nag_like(comp, cfg, "fista", prox_step=lambda s, y: prox_gradient_point(comp, s, y))


# ------------------------------------------------------------- Ravine family


def _ravine_like(problem, cfg, scheme, w_prev, coef, step, prox_step=None):
    """Shared loop: ``w_k = y_k - step * T(y_k)``, ``y_{k+1} = w_k + coef(k+1)(w_k - w_{k-1})``."""
    grad = _smooth(problem).gradient
    f_star = resolve_f_star(problem, cfg)
    objective = _objective(problem)
    gap_at = "w" if prox_step is not None else "y"
    rec = _Recorder(scheme, cfg, f_star, objective, gap_at, ("y", "w"))
    y = _start(problem, cfg)
    y_prev = y
    w_before = None if w_prev is None else np.asarray(w_prev, dtype=float)
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        if prox_step is None:
            g = grad(y)
            w = y - step * g
        else:
            w, g = prox_step(step, y)
        if w_before is None:
            w_before = w
        extra = {}
        if prox_step is not None:
            v = objective(y)
            extra["gap_y"] = v - f_star if math.isfinite(v) else math.nan
        rec.add(k, w if gap_at == "w" else y, _norm(g), _norm(y - y_prev), y=y, w=w, **extra)
        if it == cfg.max_iter:
            break
        y_prev, y = y, w + coef(k + 1) * (w - w_before)
        w_before = w
        k += 1
    return rec.build()


def run_rag(problem: SmoothProblem, cfg: SolverConfig, w_prev=None) -> Trace:
    """Ravine accelerated gradient: gradient step first, then extrapolation of the ``w``."""
    _check_step(problem, cfg, strict=True)
    a = cfg.alpha
    return _ravine_like(problem, cfg, "rag", w_prev, lambda k: 1 - a / k, cfg.step)


def run_rapg(problem, cfg: SolverConfig, w_prev=None) -> Trace:
    """Ravine accelerated proximal gradient.

    The gap column is ``theta(w_k) - theta*`` (``w_k`` is the point produced
    by the prox step, hence feasible); ``extra["gap_y"]`` holds
    ``theta(y_k) - theta*``. With ``g = 0`` every sequence equals
    :func:`run_rag` bit for bit, and ``extra["gap_y"]`` equals its gap.
    """
    _check_step(problem, cfg, strict=True)
    comp = _as_composite(problem)
    a = cfg.alpha
    return _ravine_like(
        comp, cfg, "rapg", w_prev, lambda k: 1 - a / k, cfg.step,
        prox_step=lambda s, y: prox_gradient_point(comp, s, y),
    )


# ------------------------------------------------------------ implicit / SC


def run_inertial_prox(problem, cfg: SolverConfig, variant: str = "semi_implicit") -> Trace:
    """Inertial proximal algorithm: extrapolate, then apply the resolvent of the objective.

    ``semi_implicit`` uses ``1 - alpha/k`` and prox step ``s``;
    ``full_implicit`` uses ``k/(k + alpha)`` and prox step ``s/(1 + alpha/k)``.
    """
    if variant not in ("semi_implicit", "full_implicit"):
        raise ValueError(f"unknown variant {variant!r}")
    _check_step(problem, cfg)
    s, alpha = cfg.step, cfg.alpha
    full = variant == "full_implicit"
    fixed = None if full else resolvent(problem, s)
    if full:
        resolvent(problem, s)  # fail early with ProxUnavailable
    comp = _as_composite(problem)
    f_star = resolve_f_star(problem, cfg)
    rec = _Recorder("iprox_full" if full else "iprox", cfg, f_star, comp.theta, "x", ("x", "y"))
    x = _start(problem, cfg)
    x_prev = x
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        coef = k / (k + alpha) if full else 1 - alpha / k
        y = x + coef * (x - x_prev)
        rec.add(k, x, _norm(prox_gradient_point(comp, s, x)[1]), _norm(x - x_prev), x=x, y=y)
        if it == cfg.max_iter:
            break
        step_map = resolvent(problem, s / (1 + alpha / k)) if full else fixed
        x_prev, x = x, step_map(y)
        k += 1
    return rec.build()


def sc_parameters(mu: float, s: float) -> tuple[float, float]:
    """Extrapolation coefficient ``q`` and step ``s / (1 + sqrt(mu s))`` of the SC schemes."""
    r = math.sqrt(mu * s)
    return (1 - r) / (1 + r), s / (1 + r)


def run_sc(problem, cfg: SolverConfig, variant: str = "nesterov") -> Trace:
    """Strongly convex schemes with constant extrapolation coefficient ``q``.

    ``prox``: resolvent step. ``nesterov``: gradient step. ``ravine``: the
    nesterov scheme with the roles of ``x`` and ``y`` interchanged.
    """
    if variant not in ("prox", "nesterov", "ravine"):
        raise ValueError(f"unknown variant {variant!r}")
    if not cfg.mu > 0:
        raise MuRequired("strongly convex schemes need mu > 0")
    _check_step(problem, cfg)
    q, sigma = sc_parameters(cfg.mu, cfg.step)
    scheme = f"sc_{variant}"
    if variant == "ravine":
        return _ravine_like(problem, cfg, scheme, None, lambda k: q, sigma)
    grad = _smooth(problem).gradient
    step_map = resolvent(problem, sigma) if variant == "prox" else None
    f_star = resolve_f_star(problem, cfg)
    rec = _Recorder(scheme, cfg, f_star, _objective(problem), "x", ("x", "y"))
    x = _start(problem, cfg)
    x_prev = x
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        y = x + q * (x - x_prev)
        rec.add(k, x, _norm(grad(x)), _norm(x - x_prev), x=x, y=y)
        if it == cfg.max_iter:
            break
        x_next = step_map(y) if step_map is not None else y - sigma * grad(y)
        x_prev, x = x, x_next
        k += 1
    return rec.build()


# ------------------------------------------------------------------ baselines


def run_gd(problem: SmoothProblem, cfg: SolverConfig) -> Trace:
    _check_step(problem, cfg)
    grad, s = problem.gradient, cfg.step
    rec = _Recorder("gd", cfg, resolve_f_star(problem, cfg), problem.value, "x", ("x",))
    x = _start(problem, cfg)
    x_prev = x
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        g = grad(x)
        rec.add(k, x, _norm(g), _norm(x - x_prev), x=x)
        if it == cfg.max_iter:
            break
        x_prev, x = x, x - s * g
        k += 1
    return rec.build()


def run_heavy_ball(problem: SmoothProblem, cfg: SolverConfig, momentum: float | None = None) -> Trace:
    """``x_{k+1} = x_k + m (x_k - x_{k-1}) - s grad f(x_k)``; ``m = 0`` is :func:`run_gd` exactly."""
    m = cfg.momentum if momentum is None else momentum
    if not 0 <= m < 1:
        raise ValueError(f"momentum must lie in [0, 1), got {m}")
    _check_step(problem, cfg)
    grad, s = problem.gradient, cfg.step
    rec = _Recorder("hb", cfg, resolve_f_star(problem, cfg), problem.value, "x", ("x",))
    x = _start(problem, cfg)
    x_prev = x
    k = cfg.k_start
    for it in range(cfg.max_iter + 1):
        g = grad(x)
        rec.add(k, x, _norm(g), _norm(x - x_prev), x=x)
        if it == cfg.max_iter:
            break
        x_prev, x = x, x + m * (x - x_prev) - s * g
        k += 1
    return rec.build()


# ---------------------------------------------------------------- equivalence


def nag_rag_equivalence_residual(problem, cfg: SolverConfig) -> tuple[float, float]:
    """Check both directions of the NAG/RAG correspondence as recursion residuals.

    (i) From a NAG run, ``w_k := x_{k+1}`` must satisfy the RAG recursion
    ``y_{k+1} = w_k + (1 - alpha/(k+1))(w_k - w_{k-1})``.
    (ii) From a RAG run, ``x_{k+1} := w_k`` must satisfy the NAG recursion
    ``y_k = x_k + (1 - alpha/k)(x_k - x_{k-1})``.
    Returns the largest residual norm of each direction over ``k >= k_start + 1``.
    """
    a = cfg.alpha
    nag = run_nag(problem, cfg)
    # rows i <-> k = k_start + i; w_k = x[i+1]; need w_{k-1} = x[i] and y_{k+1} = y[i+2]
    r1 = 0.0
    for i in range(1, len(nag) - 1):
        k = int(nag.k[i])
        w, w_prev = nag.x[i + 1], nag.x[i]
        r1 = max(r1, _norm(nag.y[i + 1] - (w + (1 - a / (k + 1)) * (w - w_prev))))
    rag = run_rag(problem, cfg)
    grad = _smooth(problem).gradient
    xs = [rag.y[i] - cfg.step * grad(rag.y[i]) for i in range(len(rag))]  # x_{k+1}
    r2 = 0.0
    # y_k = x_k + (1 - alpha/k)(x_k - x_{k-1}) with x_k = xs[i-1], x_{k-1} = xs[i-2]
    for i in range(2, len(rag)):
        k = int(rag.k[i])
        x, x_prev = xs[i - 1], xs[i - 2]
        r2 = max(r2, _norm(rag.y[i] - (x + (1 - a / k) * (x - x_prev))))
    return r1, r2


def max_iterate_norm(trace: Trace) -> float:
    return max(float(np.max(np.linalg.norm(a, axis=1))) for a in (trace.x, trace.y, trace.w) if a is not None)


def run_scheme(name: str, problem, cfg: SolverConfig, **kwargs) -> Trace:
    """Dispatch by the scheme names used in experiment configs."""
    table = {
        "nag": run_nag,
        "rag": run_rag,
        "igahd": run_igahd,
        "iprox": lambda p, c: run_inertial_prox(p, c, "semi_implicit"),
        "iprox_full": lambda p, c: run_inertial_prox(p, c, "full_implicit"),
        "rapg": run_rapg,
        "fista": run_fista_like,
        "sc_prox": lambda p, c: run_sc(p, c, "prox"),
        "sc_nesterov": lambda p, c: run_sc(p, c, "nesterov"),
        "sc_ravine": lambda p, c: run_sc(p, c, "ravine"),
        "gd": run_gd,
        "hb": run_heavy_ball,
    }
    if name not in table:
        raise KeyError(name)
    return table[name](problem, cfg, **kwargs)
