"""Why the high-resolution ODE is worth its extra term.

Both NAG and the Ravine method converge, as s -> 0, to x'' + (alpha/t) x' +
grad f(x) = 0. Keeping the sqrt(s) terms adds a Hessian damping and a
time-dependent gradient weight. The first-order ODE tracks the iterates with
O(sqrt(s)) error; the refined one does it with O(s).
"""

import ravine
from ravine.objective import QuadraticSpec

problem = ravine.make_quadratic(QuadraticSpec([[1.0]], [0.0]))
print(f"{'which':6s}{'s':>10s}{'lowres':>12s}{'highres':>12s}")
for which in ("nag", "rag"):
    prev = None
    for s in (1e-2, 2.5e-3, 6.25e-4):
        gap = ravine.resolution_gap(problem, 3.0, s, horizon=5.0, which=which)
        print(f"{which:6s}{s:10.2e}{gap.lowres_err:12.3e}{gap.highres_err:12.3e}", end="")
        if prev is not None:
            print(f"   contraction {prev.lowres_err / gap.lowres_err:.2f} vs {prev.highres_err / gap.highres_err:.2f}",
                  end="")
        print()
        prev = gap
