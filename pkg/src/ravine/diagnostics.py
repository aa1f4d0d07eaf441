"""Lyapunov energies, summability monitors, rate fits and reference minima.

Everything here reads finished traces; nothing mutates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData
from .objective import SmoothProblem
from .prox import CompositeProblem, prox_gradient_point

FLOOR = 1e-13
MONOTONE_SLACK = 1e-10
TAIL_FACTOR = 0.2
MIN_POINTS = 10


@dataclass(frozen=True)
class EnergyRecord:
    k: int
    value: float
    kind: str


@dataclass(frozen=True, eq=False)
class EnergySeries:
    """Energy values ``E_k`` for the indices in ``k``.

    ``check_from`` is the first index of the monotonicity sweep;
    ``max_increase`` is ``max (E_{k+1} - E_k)`` over the sweep and
    ``slack`` the allowed rounding, ``1e-10`` times the first swept value.
    """

    kind: str
    k: np.ndarray
    values: np.ndarray
    check_from: int

    @property
    def _swept(self) -> np.ndarray:
        return self.values[self.k >= self.check_from]

    @property
    def max_increase(self) -> float:
        e = self._swept
        return float(np.max(np.diff(e))) if e.size > 1 else 0.0

    @property
    def slack(self) -> float:
        e = self._swept
        return MONOTONE_SLACK * float(e[0]) if e.size else 0.0

    @property
    def monotone(self) -> bool:
        return self.max_increase <= self.slack

    def records(self) -> list[EnergyRecord]:
        return [EnergyRecord(int(k), float(v), self.kind) for k, v in zip(self.k, self.values)]


def _gap_relative_to(trace, f_star_anchor):
    if f_star_anchor is None:
        return trace.gap
    return trace.gap + (trace.f_star - f_star_anchor)


def energy_nag(trace, anchor, alpha: float, s: float, anchor_value: float | None = None) -> EnergySeries:
    """``E_k = t_k^2 (f(x_k) - f(z)) + |x_{k-1} - z + t_k (x_k - x_{k-1})|^2 / (2s)``, ``t_k = (k-1)/(alpha-1)``.

    Defined for ``k >= k_start + 1``. ``f(z)`` is the trace's ``f*`` unless
    ``anchor_value`` is given. The monotonicity sweep starts at
    ``k = ceil(alpha - 1)``: earlier steps use the negative coefficients
    ``1 - alpha/k`` and the energy may rise there.
    """
    if trace.x is None:
        raise ValueError(f"{trace.scheme} trace has no x sequence")
    if not alpha > 1:
        raise ValueError("energy_nag needs alpha > 1")
    z = np.asarray(anchor, dtype=float)
    gap = _gap_relative_to(trace, anchor_value)
    k = trace.k[1:]
    t = (k - 1) / (alpha - 1)
    x, xp = trace.x[1:], trace.x[:-1]
    m = xp - z + t[:, None] * (x - xp)
    e = t * t * gap[1:] + np.einsum("ij,ij->i", m, m) / (2 * s)
    start = max(int(trace.k[0]) + 1, math.ceil(alpha - 1))
    return EnergySeries("E_nag", k, e, start)


def energy_rag(trace, anchor, alpha: float, s: float, anchor_value: float | None = None) -> EnergySeries:
    """``E_k = h^2 (k+2-alpha)(k+1)(f(y_k) - f*) + |z_k|^2 / 2`` with ``h = sqrt(s)`` and

    ``z_k = (alpha-1)(y_{k+1} - x*) + h (k+2-alpha)(v_k + h grad f(y_k))``,
    ``v_k = (y_{k+1} - y_k)/h``. Since ``y_k - s grad f(y_k) = w_k`` the last
    factor is ``(y_{k+1} - w_k)/h``, so no gradient is re-evaluated. Indices
    with ``k + 2 - alpha < 0`` are skipped; the final row has no ``y_{k+1}``.
    """
    if trace.y is None or trace.w is None:
        raise ValueError(f"{trace.scheme} trace has no y/w sequences")
    z = np.asarray(anchor, dtype=float)
    gap_y = trace.extra.get("gap_y", trace.gap) if trace.main == "w" else trace.gap
    if anchor_value is not None:
        gap_y = gap_y + (trace.f_star - anchor_value)
    k = trace.k[:-1]
    keep = k + 2 - alpha >= 0
    c = (k + 2 - alpha)[keep]
    y_next = trace.y[1:][keep]
    w = trace.w[:-1][keep]
    zk = (alpha - 1) * (y_next - z) + c[:, None] * (y_next - w)
    e = s * c * (k[keep] + 1) * gap_y[:-1][keep] + 0.5 * np.einsum("ij,ij->i", zk, zk)
    kk = k[keep]
    return EnergySeries("E_rag", kk, e, int(kk[0]) if kk.size else 0)


def energy_for(trace, anchor, anchor_value: float | None = None) -> EnergySeries:
    """Pick the energy that matches the trace's scheme."""
    if trace.scheme in ("rag", "rapg"):
        return energy_rag(trace, anchor, trace.alpha, trace.step, anchor_value)
    return energy_nag(trace, anchor, trace.alpha, trace.step, anchor_value)


@dataclass(frozen=True, eq=False)
class SummabilityReport:
    """Partial sums ``S_K`` and the tail proxy ``(S_{2K} - S_K) / S_K``."""

    weight: str
    k: np.ndarray
    partial: np.ndarray
    K: int
    tail_ratio: float

    @property
    def passed(self) -> bool:
        return self.tail_ratio <= TAIL_FACTOR


def summability(trace, weight: str, K: int | None = None) -> SummabilityReport:
    """Partial sums of ``k^2 |grad|^2`` (``k2_gradsq``) or ``k * gap`` (``k_gap``).

    A finite run cannot prove summability; the tail check asks that doubling
    the horizon from ``K`` adds at most 20% to ``S_K``. ``K`` defaults to the
    largest index with ``2K`` still in the trace.
    """
    k = trace.k.astype(float)
    if weight == "k2_gradsq":
        terms = k * k * trace.grad_norm**2
    elif weight == "k_gap":
        terms = k * np.nan_to_num(trace.gap, nan=0.0)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    partial = np.cumsum(terms)
    if K is None:
        K = int(trace.k[-1]) // 2
    if 2 * K > trace.k[-1] or K < trace.k[0]:
        raise InsufficientData(f"trace ends at k={trace.k[-1]}, cannot evaluate S_{2 * K}")
    s_k = partial[np.searchsorted(trace.k, K, side="right") - 1]
    s_2k = partial[np.searchsorted(trace.k, 2 * K, side="right") - 1]
    ratio = 0.0 if s_k == 0 else float((s_2k - s_k) / s_k)
    return SummabilityReport(weight, trace.k, partial, K, ratio)


def min_grad_series(trace) -> tuple[np.ndarray, np.ndarray]:
    """``k^3 min_{i <= k} |grad_i|^2`` along the trace."""
    k = trace.k.astype(float)
    return trace.k, k**3 * np.minimum.accumulate(trace.grad_norm**2)


def min_grad_rate(trace, k_min: int = 100, k_max: int | None = None) -> float:
    """Largest value of ``k^3 min_{i <= k} |grad_i|^2`` over ``[k_min, k_max]``."""
    k, stat = min_grad_series(trace)
    sel = (k >= k_min) & (k <= (k[-1] if k_max is None else k_max))
    if not np.any(sel):
        raise InsufficientData(f"no indices in [{k_min}, {k_max}]")
    return float(np.max(stat[sel]))


@dataclass(frozen=True)
class RateReport:
    slope: float
    intercept: float
    window: tuple[float, float]
    n_points: int
    floor_hits: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "window": list(self.window),
            "n_points": self.n_points,
            "floor_hits": self.floor_hits,
        }


def _select(k, values, k_min, k_max, floor):
    k = np.asarray(k, dtype=float)
    v = np.asarray(values, dtype=float)
    lo = k.min() if k_min is None else k_min
    hi = k.max() if k_max is None else k_max
    win = (k >= lo) & (k <= hi) & np.isfinite(v)
    above = win & (v > floor)
    n = int(np.count_nonzero(above))
    if n < MIN_POINTS:
        raise InsufficientData(f"{n} usable points in [{lo:g}, {hi:g}], need {MIN_POINTS}")
    return k[above], v[above], (float(lo), float(hi)), int(np.count_nonzero(win) - n)


def rate_slope(k, values, k_min=None, k_max=None, floor: float = FLOOR) -> RateReport:
    """Least-squares slope of ``log10(value)`` against ``log10(k)``.

    Values at or below ``floor`` are dropped and counted in ``floor_hits``.
    """
    kk, vv, window, hits = _select(k, values, k_min, k_max, floor)
    slope, intercept = np.polyfit(np.log10(kk), np.log10(vv), 1)
    return RateReport(float(slope), float(intercept), window, kk.size, hits)


def log_linear_slope(t, values, t_min=None, t_max=None, floor: float = FLOOR) -> RateReport:
    """Least-squares slope of ``ln(value)`` against ``t`` (exponential decay rate)."""
    tt, vv, window, hits = _select(t, values, t_min, t_max, floor)
    slope, intercept = np.polyfit(tt, np.log(vv), 1)
    return RateReport(float(slope), float(intercept), window, tt.size, hits)


def geometric_ratio(k, values, k_min=None, k_max=None, floor: float = FLOOR) -> float:
    """Fitted per-iteration contraction factor ``exp(d ln(value) / dk)``."""
    return math.exp(log_linear_slope(k, values, k_min, k_max, floor).slope)


def count_oscillations(series) -> int:
    """Number of strict interior local maxima."""
    a = np.asarray(series, dtype=float)
    if a.size < 3:
        raise InsufficientData("need at least 3 values")
    return int(np.count_nonzero((a[1:-1] > a[:-2]) & (a[1:-1] > a[2:])))


def estimate_min(problem, budget: int = 100_000) -> float:
    """Reference minimum from ``budget`` accelerated iterations with ``alpha = 4``, ``s = 1/L``.

    Smooth problems run NAG; composite problems run its prox-gradient form.
    Returns the smallest value seen minus ``1e-15 (1 + |min|)``, so gaps
    measured against it stay positive.
    """
    if budget < 100_000:
        raise ValueError("budget must be at least 1e5")
    if isinstance(problem, SmoothProblem):
        objective, grad, step = problem.value, problem.gradient, None
    elif isinstance(problem, CompositeProblem):
        objective, grad = problem.theta, None

        def step(s, y):
            return prox_gradient_point(problem, s, y)[0]
    else:
        raise TypeError(f"unsupported problem type {type(problem).__name__}")
    s = 1.0 / problem.lipschitz
    x = x_prev = np.zeros(problem.dim)
    best = objective(x)
    for k in range(1, budget + 1):
        y = x + (1 - 4.0 / k) * (x - x_prev)
        x_prev = x
        x = y - s * grad(y) if step is None else step(s, y)
        v = objective(x)
        if v < best:
            best = v
    return best - 1e-15 * (1 + abs(best))
