"""Proximal operators, composite objectives ``theta = f + g`` and the prox-gradient map."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBox, ProxUnavailable, StepTooLarge
from .objective import SmoothProblem, make_least_squares

STEP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProxFriendly:
    """A convex lsc function ``g`` with a closed-form proximal map.

    ``value`` may return ``inf`` (indicator functions). ``prox(s, y)`` returns
    ``argmin_z g(z) + ||z - y||^2 / (2 s)``.
    """

    value: Callable[[np.ndarray], float]
    prox: Callable[[float, np.ndarray], np.ndarray]
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"


def soft_threshold(y, tau):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def prox_l1(lam: float) -> ProxFriendly:
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    lam = float(lam)

    def value(x):
        return lam * float(np.sum(np.abs(x)))

    def prox(s, y):
        return soft_threshold(y, s * lam)

    return ProxFriendly(value, prox, "l1", {"lambda": lam})


def prox_zero() -> ProxFriendly:
    def value(x):
        return 0.0

    def prox(s, y):
        return np.asarray(y, dtype=float)

    return ProxFriendly(value, prox, "zero")


def prox_box(lo, hi) -> ProxFriendly:
    """Indicator of ``[lo, hi]``; its prox is the clamp, whatever the step."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.shape != hi.shape:
        raise ValueError("lo and hi must have the same shape")
    if np.any(lo > hi):
        raise EmptyBox(f"empty box: lo={lo.tolist()} hi={hi.tolist()}")

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.0 if np.all((x >= lo) & (x <= hi)) else np.inf

    def prox(s, y):
        return np.clip(np.asarray(y, dtype=float), lo, hi)

    return ProxFriendly(value, prox, "box", {"lo": lo.tolist(), "hi": hi.tolist()})


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    smooth: SmoothProblem
    nonsmooth: ProxFriendly
    theta_min: float | None = None
    name: str = "composite"
    minimizer: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.smooth.dim

    @property
    def lipschitz(self) -> float:
        return self.smooth.lipschitz

    def theta(self, x) -> float:
        return self.smooth.value(x) + self.nonsmooth.value(x)


def make_lasso(rows: int = 10, dim: int = 20, lam: float = 0.1, seed: int = 0) -> CompositeProblem:
    """Seeded lasso ``1/2 ||Mx - y||^2 + lam ||x||_1`` with Gaussian design.

    ``rows < dim`` keeps the smooth part merely convex. ``theta_min`` is left
    unset; see :func:`ravine.diagnostics.estimate_min`.
    """
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, dim)) / np.sqrt(rows)
    x_true = np.zeros(dim)
    support = rng.choice(dim, size=max(1, dim // 5), replace=False)
    x_true[support] = rng.standard_normal(support.size)
    y = M @ x_true + 0.1 * rng.standard_normal(rows)
    smooth = make_least_squares(M, y, name=f"lasso_smooth(rows={rows},dim={dim},seed={seed})")
    return CompositeProblem(smooth, prox_l1(lam), name=f"lasso(rows={rows},dim={dim},lam={lam:g},seed={seed})")


def make_log_spectrum_lasso(
    dim: int = 20, lam: float = 1e-3, curvature_min: float = 1e-6
) -> CompositeProblem:
    """Diagonal lasso whose smooth curvatures are log-spaced in ``[curvature_min, 1]``.

    The data are chosen so the minimizer is ``(1, ..., 1)``, hence ``theta*``
    is exact. Random Gaussian designs identify their support early and then
    converge linearly; this instance keeps the sublinear regime visible for
    ``k`` up to ``1/sqrt(curvature_min)``. Start it from the origin.
    """
    sigma = np.sqrt(np.logspace(np.log10(curvature_min), 0.0, dim))
    y = (sigma**2 + lam) / sigma  # optimality: sigma^2 - sigma y + lam = 0 at x = 1
    smooth = make_least_squares(np.diag(sigma), y, name=f"log_lasso_smooth(dim={dim})")
    comp = CompositeProblem(smooth, prox_l1(lam))
    return CompositeProblem(
        smooth, prox_l1(lam), theta_min=comp.theta(np.ones(dim)),
        name=f"log_spectrum_lasso(dim={dim},lam={lam:g})", minimizer=np.ones(dim),
    )


def prox_gradient_point(problem: CompositeProblem, s: float, y) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(p, T)`` with ``p = prox_{sg}(y - s grad f(y))`` and ``T = (y - p) / s``.

    For ``g = 0`` this returns ``p = y - s grad f(y)`` and ``T = grad f(y)``
    exactly, so schemes built on it reduce bit-for-bit to their smooth versions.
    """
    y = np.asarray(y, dtype=float)
    g = problem.smooth.gradient(y)
    if problem.nonsmooth.is_zero:
        return y - s * g, g
    p = problem.nonsmooth.prox(s, y - s * g)
    return p, (y - p) / s


def forward_backward_map(problem: CompositeProblem, s: float, y) -> np.ndarray:
    """``T_s(y) = (y - prox_{sg}(y - s grad f(y))) / s``; zero exactly at minimizers."""
    if not s > 0:
        raise ValueError("s must be positive")
    return prox_gradient_point(problem, s, y)[1]


def composite_descent_gap(problem, s: float, x, y, refined: bool = False) -> float:
    """Slack of the composite descent inequality

        theta(y - s T_s(y)) <= theta(x) + <T_s(y), y - x> - s/2 ||T_s(y)||^2,

    nonnegative whenever ``s L <= 1``. With ``refined=True`` (smooth problems
    only) the sharper bound with the extra ``- s/2 ||grad f(x) - grad f(y)||^2``
    term is used instead.
    """
    if isinstance(problem, SmoothProblem):
        problem = CompositeProblem(problem, prox_zero())
    if s * problem.lipschitz > 1 + STEP_TOL:
        raise StepTooLarge(f"step.lipschitz = {s * problem.lipschitz:.6g} exceeds 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p, T = prox_gradient_point(problem, s, y)
    rhs = problem.theta(x) + float(T @ (y - x)) - 0.5 * s * float(T @ T)
    if refined:
        if not problem.nonsmooth.is_zero:
            raise ValueError("the refined descent inequality needs g = 0")
        d = problem.smooth.gradient(x) - T
        rhs -= 0.5 * s * float(d @ d)
    return rhs - problem.theta(p)


def resolvent(problem, step: float) -> Callable[[np.ndarray], np.ndarray]:
    """Exact ``prox_{step * phi}`` for the objective ``phi`` of ``problem``.

    Available for quadratic smooth problems, for quadratic ``f`` plus ``g = 0``,
    and for diagonal quadratic ``f`` plus an l1 or box ``g`` (the problem then
    separates by coordinate). Anything else raises :class:`ProxUnavailable`.
    """
    if isinstance(problem, CompositeProblem):
        smooth, g = problem.smooth, problem.nonsmooth
    else:
        smooth, g = problem, None
    q = smooth.quadratic
    if q is None:
        raise ProxUnavailable(f"no closed-form resolvent for {smooth.name}")
    A, b = q.matrix, q.offset
    if g is None or g.is_zero:
        M = np.eye(q.dim) + step * A

        def apply(y):
            return np.linalg.solve(M, np.asarray(y, dtype=float) + step * b)

        return apply
    if not np.array_equal(A, np.diag(np.diag(A))):
        raise ProxUnavailable(f"resolvent of f + {g.kind} needs a diagonal quadratic f")
    scale = 1.0 + step * np.diag(A)
    if g.kind == "l1":
        lam = g.params["lambda"]
        return lambda y: soft_threshold(np.asarray(y, dtype=float) + step * b, step * lam) / scale
    if g.kind == "box":
        lo, hi = np.array(g.params["lo"]), np.array(g.params["hi"])
        return lambda y: np.clip((np.asarray(y, dtype=float) + step * b) / scale, lo, hi)
    raise ProxUnavailable(f"no closed-form resolvent for g of kind {g.kind!r}")
