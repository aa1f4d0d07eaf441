"""Smooth test problems and the evaluation contract consumed by solvers and integrators.

A :class:`SmoothProblem` bundles ``f``, its gradient, a Lipschitz constant of the
gradient and, when known, a Hessian-vector product, the minimum value and a
minimizer. Problems are immutable; every solver run only reads them.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidCondition, NonFiniteValue, NotPositiveSemidefinite, NotSymmetric

Vector = np.ndarray

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    """``f(x) = 1/2 <Ax, x> - <b, x> + constant`` with ``A`` symmetric PSD."""

    matrix: np.ndarray
    offset: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(np.atleast_2d(self.matrix)))
        object.__setattr__(self, "offset", _frozen(np.atleast_1d(self.offset)))

    @property
    def dim(self) -> int:
        return self.offset.shape[0]


@dataclass(frozen=True, eq=False)
class SmoothProblem:
    """Evaluation bundle for a convex ``C^1`` function with Lipschitz gradient.

    ``quadratic`` is kept when the problem was built from a :class:`QuadraticSpec`;
    solvers use it to apply exact resolvents ``(I + s A)^{-1}``.
    ``strong_convexity`` is the modulus ``mu`` when known (0 otherwise).
    """

    dim: int
    value: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    lipschitz: float
    hvp: Callable[[Vector, Vector], Vector] | None = None
    min_value: float | None = None
    minimizer: np.ndarray | None = None
    strong_convexity: float = 0.0
    quadratic: QuadraticSpec | None = None
    name: str = "custom"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not self.lipschitz > 0:
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz}")
        if self.minimizer is not None:
            object.__setattr__(self, "minimizer", _frozen(self.minimizer))


def make_quadratic(spec: QuadraticSpec, name: str = "quadratic") -> SmoothProblem:
    """Build the quadratic problem described by ``spec``.

    Raises :class:`NotSymmetric` when ``max|A - A^T| > 1e-10`` and
    :class:`NotPositiveSemidefinite` when an eigenvalue is below ``-1e-12``.
    The minimizer and minimum value are reported only when ``A`` is invertible.

    The all-zero matrix has no positive Lipschitz constant; any positive number
    is valid for it and 1.0 is used.
    """
    A, b, c = spec.matrix, spec.offset, float(spec.constant)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match offset length {n}")
    asym = float(np.max(np.abs(A - A.T))) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise NotSymmetric(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    eig = np.linalg.eigvalsh(0.5 * (A + A.T))
    if eig[0] < -PSD_TOL:
        raise NotPositiveSemidefinite(f"smallest eigenvalue {eig[0]:.3e} is negative")
    lam_max, lam_min = float(eig[-1]), max(float(eig[0]), 0.0)

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * (x @ (A @ x)) - b @ x + c)

    def gradient(x):
        return A @ np.asarray(x, dtype=float) - b

    def hvp(x, v):
        return A @ np.asarray(v, dtype=float)

    minimizer = min_value = None
    if lam_min > 1e-14 * max(1.0, lam_max):
        minimizer = np.linalg.solve(A, b)
        min_value = float(-0.5 * (b @ minimizer) + c)

    return SmoothProblem(
        dim=n,
        value=value,
        gradient=gradient,
        lipschitz=lam_max if lam_max > 0 else 1.0,
        hvp=hvp,
        min_value=min_value,
        minimizer=minimizer,
        strong_convexity=lam_min,
        quadratic=spec,
        name=name,
    )


def make_ill_conditioned_2d(condition: float) -> SmoothProblem:
    """``A = diag(1, condition)``, ``b = 0``: the planar oscillation test problem."""
    if not condition >= 1:
        raise InvalidCondition(f"condition must be >= 1, got {condition}")
    spec = QuadraticSpec(np.diag([1.0, float(condition)]), np.zeros(2))
    return make_quadratic(spec, name=f"ill_conditioned_2d(condition={condition:g})")


def make_random_quadratic(dim: int, seed: int, rank: int | None = None) -> SmoothProblem:
    """Random PSD quadratic ``A = G^T G / dim`` from a seeded PCG64 generator.

    With ``rank < dim`` the matrix is singular; ``b`` is then taken in the range
    of ``A`` so the problem still has minimizers.
    """
    rng = np.random.default_rng(seed)
    rank = dim if rank is None else rank
    G = rng.standard_normal((rank, dim))
    A = G.T @ G / dim
    A = 0.5 * (A + A.T)
    b = A @ rng.standard_normal(dim) if rank < dim else rng.standard_normal(dim)
    return make_quadratic(QuadraticSpec(A, b), name=f"random_quadratic(dim={dim},seed={seed})")


def make_log_spectrum_quadratic(
    dim: int = 100, lam_min: float = 1e-6, lam_max: float = 1.0
) -> SmoothProblem:
    """Diagonal quadratic with log-uniform eigenvalues and minimizer ``(1, ..., 1)``.

    Every scale of the spectrum carries the same weight, which makes plain
    gradient descent decay as ``1/k`` and accelerated methods as ``1/k^2`` until
    ``k`` reaches ``1/sqrt(lam_min * s)``. The constant is chosen so that
    ``min f = 0``. Start it from the origin.
    """
    lam = np.logspace(np.log10(lam_min), np.log10(lam_max), dim)
    spec = QuadraticSpec(np.diag(lam), lam.copy(), constant=0.5 * float(lam.sum()))
    p = make_quadratic(spec, name=f"log_spectrum(dim={dim},lam_min={lam_min:g})")
    # the generic minimizer/min_value come from a linear solve; the exact ones are known
    return replace(p, minimizer=np.ones(dim), min_value=0.0)


def make_least_squares(M, y, name: str = "least_squares") -> SmoothProblem:
    """``f(x) = 1/2 ||Mx - y||^2`` evaluated through the residual.

    The residual form avoids the cancellation of ``1/2 x'Ax - b'x + c`` near the
    minimum, which matters for Lyapunov monotonicity checks. When ``y`` lies in
    the range of ``M`` the minimum value is exactly 0 and the minimum-norm
    minimizer is reported.
    """
    M = _frozen(np.atleast_2d(M))
    y = _frozen(np.atleast_1d(y))
    A = M.T @ M
    b = M.T @ y

    def value(x):
        r = M @ np.asarray(x, dtype=float) - y
        return float(0.5 * (r @ r))

    def gradient(x):
        return M.T @ (M @ np.asarray(x, dtype=float) - y)

    def hvp(x, v):
        return M.T @ (M @ np.asarray(v, dtype=float))

    x_ls, *_ = np.linalg.lstsq(M, y, rcond=None)
    residual = float(np.linalg.norm(M @ x_ls - y))
    if residual <= 1e-10 * (1.0 + float(np.linalg.norm(y))):
        min_value = 0.0
    else:
        min_value = value(x_ls)
    sv = np.linalg.svd(M, compute_uv=False)
    n = M.shape[1]
    mu = float(sv[-1] ** 2) if M.shape[0] >= n else 0.0
    return SmoothProblem(
        dim=n,
        value=value,
        gradient=gradient,
        lipschitz=float(sv[0] ** 2),
        hvp=hvp,
        min_value=min_value,
        minimizer=x_ls,
        strong_convexity=mu,
        quadratic=QuadraticSpec(A, b, constant=0.5 * float(y @ y)),
        name=name,
    )


def make_zero(dim: int) -> SmoothProblem:
    """The constant-zero function; every point is a minimizer."""
    return make_quadratic(QuadraticSpec(np.zeros((dim, dim)), np.zeros(dim)), name="zero")


def _finite_or_raise(v, what: str):
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"{what} is not finite")
    return v


def check_gradient(problem: SmoothProblem, point, eps: float) -> float:
    """Max coordinate discrepancy between central differences and the gradient."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(point, dtype=float).reshape(problem.dim)
    _finite_or_raise(x, "point")
    g = _finite_or_raise(np.asarray(problem.gradient(x), dtype=float), "gradient")
    fd = np.empty(problem.dim)
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = eps
        fp = _finite_or_raise(problem.value(x + e), "value")
        fm = _finite_or_raise(problem.value(x - e), "value")
        fd[i] = (fp - fm) / (2 * eps)
    return float(np.max(np.abs(fd - g)))


def hvp_or_fd(problem: SmoothProblem, point, direction) -> np.ndarray:
    """Hessian-vector product, analytic when available, else a central difference.

    The difference step is ``sqrt(eps_mach) * (1 + ||x||) / ||v||``.
    """
    x = np.asarray(point, dtype=float)
    v = np.asarray(direction, dtype=float)
    _finite_or_raise(v, "direction")
    if problem.hvp is not None:
        return _finite_or_raise(np.asarray(problem.hvp(x, v), dtype=float), "hvp")
    nv = float(np.linalg.norm(v))
    if nv <= 1e-30:
        return np.zeros_like(x)
    h = np.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(x))) / max(nv, 1e-30)
    gp = _finite_or_raise(problem.gradient(x + h * v), "gradient")
    gm = _finite_or_raise(problem.gradient(x - h * v), "gradient")
    return (gp - gm) / (2 * h)
