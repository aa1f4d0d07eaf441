"""Nesterov and the Ravine method are the same algorithm seen at different points.

NAG extrapolates and then takes a gradient step; the Ravine method does it the
other way round. Feed one's iterates to the other's recursion and nothing is
left over. The two also share the accelerated 1/k^2 rate, which gradient
descent lacks.
"""

import numpy as np

import ravine
from ravine.diagnostics import energy_nag, energy_rag, rate_slope

problem = ravine.make_random_quadratic(10, seed=0)
cfg = ravine.SolverConfig(alpha=3.5, step=1 / problem.lipschitz, max_iter=500, x_init=np.ones(10))
r1, r2 = ravine.nag_rag_equivalence_residual(problem, cfg)
print(f"residual of RAG recursion on NAG iterates: {r1:.1e}")
print(f"residual of NAG recursion on RAG iterates: {r2:.1e}")

# A problem with curvatures spread over six decades stays in the sublinear
# regime long enough to measure a slope.
slow = ravine.make_log_spectrum_quadratic(100)
start = np.zeros(100)
print("\nslope of log(gap) against log(k) over k in [100, 10000]:")
for name in ("nag", "rag", "gd"):
    c = ravine.SolverConfig(alpha=3.0, step=0.9, max_iter=10_000, x_init=start)
    t = ravine.run_scheme(name, slow, c)
    print(f"  {name:4s} {rate_slope(t.k, t.gap, 100, 10_000).slope:+.2f}")

c = ravine.SolverConfig(alpha=3.0, step=0.9, max_iter=10_000, x_init=start)
for label, e in (
    ("E_nag", energy_nag(ravine.run_nag(slow, c), slow.minimizer, 3.0, 0.9)),
    ("E_rag", energy_rag(ravine.run_rag(slow, c), slow.minimizer, 3.0, 0.9)),
):
    print(f"{label}: {e.values[0]:.4g} -> {e.values[-1]:.4g}, monotone: {e.monotone}")
