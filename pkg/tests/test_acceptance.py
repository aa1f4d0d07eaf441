"""Acceptance criteria, one test each.

Every test records a ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line that pytest prints in its terminal summary. Run the file directly
(``python tests/test_acceptance.py``) to print the lines without pytest.
"""

import math
import sys
from dataclasses import replace

import numpy as np
import pytest

from ravine.diagnostics import (
    count_oscillations,
    energy_nag,
    energy_rag,
    geometric_ratio,
    log_linear_slope,
    min_grad_series,
    rate_slope,
    summability,
)
from ravine.dynamics import OdeSpec, integrate, resolution_gap
from ravine.objective import (
    QuadraticSpec,
    check_gradient,
    make_ill_conditioned_2d,
    make_least_squares,
    make_log_spectrum_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_zero,
)
from ravine.prox import (
    CompositeProblem,
    composite_descent_gap,
    make_lasso,
    make_log_spectrum_lasso,
    prox_box,
    prox_l1,
    prox_zero,
)
from ravine.solvers import (
    SolverConfig,
    max_iterate_norm,
    nag_rag_equivalence_residual,
    run_fista_like,
    run_gd,
    run_heavy_ball,
    run_igahd,
    run_nag,
    run_rag,
    run_rapg,
    run_sc,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

WINDOW = (100, 10_000)
LATE = (1_000, 10_000)


def cond100():
    return make_ill_conditioned_2d(100)


def log_spectrum():
    return make_log_spectrum_quadratic(100)


def run_cfg(problem, alpha=3.0, sL=0.9, n=10_000, x0=None, **kw):
    x0 = np.ones(problem.dim) if x0 is None else x0
    return SolverConfig(alpha=alpha, step=sL / problem.lipschitz, max_iter=n, x_init=x0, **kw)


def start(problem):
    # log-spectrum problems have their minimizer at ones
    return np.zeros(problem.dim) if "log" in problem.name else np.ones(problem.dim)


# ---------------------------------------------------------------- criteria


def criterion_1():
    p = make_random_quadratic(10, seed=0)
    worst, parts = 0.0, []
    for alpha in (3.0, 3.5, 5.0):
        c = run_cfg(p, alpha=alpha, sL=1.0, n=500)
        r1, r2 = nag_rag_equivalence_residual(p, c)
        scale = 1 + max_iterate_norm(run_nag(p, c))
        worst = max(worst, r1 / scale, r2 / scale)
        parts.append(f"a={alpha:g}: {r1:.1e}/{r2:.1e}")
    return worst <= 1e-11, f"residuals {'; '.join(parts)} (scaled max {worst:.1e} <= 1e-11)"


def lasso_surrogate():
    # wide design: the least-squares minimizer fits the data exactly
    smooth = make_lasso().smooth
    return smooth, smooth.minimizer, smooth.min_value


def criterion_2():
    cases = [("cond100", cond100(), np.zeros(2), 0.0), ("lasso_smooth", *lasso_surrogate())]
    ok, worst = True, []
    for name, p, anchor, f_anchor in cases:
        for alpha in (3.0, 4.0):
            c = run_cfg(p, alpha=alpha, f_star=f_anchor)
            for e in (energy_nag(run_nag(p, c), anchor, alpha, c.step),
                      energy_rag(run_rag(p, c), anchor, alpha, c.step)):
                ok &= e.monotone
                worst.append(e.max_increase / e.slack * 1e-10)
    return ok, f"max relative energy increase {max(worst):.2e} (slack 1e-10) over 8 runs"


def criterion_3():
    p, lasso = log_spectrum(), make_log_spectrum_lasso()
    ok, parts = True, []

    def fit(name, trace, values, window, limit, above=False):
        nonlocal ok
        s = rate_slope(trace.k, values, *window).slope
        good = s >= limit if above else s <= limit
        ok &= good
        parts.append(f"{name} {s:.2f}")

    for alpha in (3.0, 4.0):
        window, limit = (WINDOW, -1.8) if alpha == 3.0 else (LATE, -2.0)
        c = run_cfg(p, alpha=alpha, sL=1.0, x0=start(p))
        cl = run_cfg(lasso, alpha=alpha, sL=1.0, x0=start(lasso))
        runs = [
            ("nag", run_nag(p, c)),
            ("rag", run_rag(p, c)),
            ("igahd", run_igahd(p, replace(c, beta=1.0))),
            ("fista", run_fista_like(lasso, cl)),
            ("rapg", run_rapg(lasso, cl)),
        ]
        for name, t in runs:
            fit(f"{name}@a{alpha:g}", t, t.gap, window, limit)
    gd = run_gd(p, run_cfg(p, sL=1.0, x0=start(p)))
    fit("gd", gd, gd.gap, WINDOW, -1.3, above=True)
    return ok, "slopes " + ", ".join(parts)


def criterion_4():
    ok, parts = True, []
    for name, p in (("cond100", cond100()), ("log_spectrum", log_spectrum())):
        for alpha, weight in ((3.0, "k2_gradsq"), (4.0, "k_gap")):
            c = run_cfg(p, alpha=alpha, x0=start(p))
            for t in (run_nag(p, c), run_rag(p, c)):
                rep = summability(t, weight, K=5_000)
                ok &= rep.passed
                parts.append(rep.tail_ratio)
    return ok, f"max tail ratio {max(parts):.3g} <= 0.2 over {len(parts)} runs"


def criterion_5():
    ok, worst = True, 0.0
    for p in (cond100(), log_spectrum()):
        c = run_cfg(p, x0=start(p))
        for t in (run_nag(p, c), run_rag(p, c)):
            k, stat = min_grad_series(t)
            sel = (k >= WINDOW[0]) & (k <= WINDOW[1])
            base = stat[np.searchsorted(k, WINDOW[0])]
            growth = float(np.max(stat[sel]) / base) if base > 0 else 0.0
            ok &= growth <= 10
            worst = max(worst, growth)
    return ok, f"max growth of k^3 min|grad|^2 over its k=100 value {worst:.3g} <= 10"


def criterion_6():
    p = cond100()
    c = run_cfg(p, alpha=3.1, sL=1.0, n=2_000)
    nag = count_oscillations(run_nag(p, c).gap)
    igahd = count_oscillations(run_igahd(p, replace(c, beta=1.0, force=True)).gap)
    kw = dict(x0=np.ones(2), alpha=3.1)
    avd = count_oscillations(integrate(p, OdeSpec("avd", **kw), t_end=40.0, dt=0.01).objective)
    din = count_oscillations(integrate(p, OdeSpec("din_avd", beta=1.0, **kw), t_end=40.0, dt=0.01).objective)
    return igahd < nag and din < avd, f"igahd {igahd} < nag {nag}; din_avd {din} < avd {avd}"


def criterion_7():
    p = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    ok, parts = True, []
    for which in ("nag", "rag"):
        a = resolution_gap(p, 3.0, 1e-2, 5.0, which)
        b = resolution_gap(p, 3.0, 2.5e-3, 5.0, which)
        sep = (a.highres_err / b.highres_err) / (a.lowres_err / b.lowres_err)
        ok &= a.highres_err < a.lowres_err and sep >= 1.5
        parts.append(f"{which}: high {a.highres_err:.2e} < low {a.lowres_err:.2e}, separation {sep:.2f}")
    return ok, "; ".join(parts)


def criterion_8():
    scalar = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    run = integrate(scalar, OdeSpec("hbf_sc", x0=[1.0], mu=1.0, t0=0.0), t_end=20.0, dt=0.01)
    slope = log_linear_slope(run.times, run.objective).slope
    ok = slope <= -1.0 + 0.1
    p = cond100()
    c = run_cfg(p, sL=1.0, n=1_000, mu=1.0)
    limit = 1 - 0.5 * math.sqrt(c.mu * c.step)
    ratios = {}
    for variant in ("nesterov", "ravine"):
        t = run_sc(p, c, variant)
        ratios[variant] = geometric_ratio(t.k, t.gap)
        ok &= ratios[variant] <= limit
    return ok, (f"hbf_sc slope {slope:.3f} <= -0.9; ratios nesterov {ratios['nesterov']:.4f}, "
                f"ravine {ratios['ravine']:.4f} <= {limit:.4f}")


def criterion_9():
    p = make_random_quadratic(10, seed=3)
    c = run_cfg(p, sL=1.0, n=500)
    comp = CompositeProblem(p, prox_zero(), theta_min=p.min_value)
    nag, rag = run_nag(p, c), run_rag(p, c)
    fields = ("x", "y", "w", "gap", "grad_norm", "step_norm")

    def equal(a, b, names):
        return all(np.array_equal(getattr(a, f), getattr(b, f)) for f in names)

    checks = {
        "igahd(b=0)=nag": equal(run_igahd(p, c), nag, fields),
        "fista(g=0)=nag": equal(run_fista_like(comp, c), nag, fields),
        "rapg(g=0)=rag": equal(run_rapg(comp, c), rag, ("y", "w", "grad_norm", "step_norm"))
        and np.array_equal(run_rapg(comp, c).extra["gap_y"], rag.gap),
        "hb(m=0)=gd": equal(run_heavy_ball(p, c, momentum=0.0), run_gd(p, c), fields),
    }
    return all(checks.values()), ", ".join(f"{k} {'bitwise' if v else 'DIFFERS'}" for k, v in checks.items())


def criterion_10():
    rng = np.random.default_rng(2024)
    grid = np.linspace(-10, 10, 200_001)  # spacing 1e-4, oracle error <= 5e-5
    prox_err = 0.0
    for g in (prox_l1(0.7), prox_zero(), prox_box([-1.5], [2.0])):
        on_grid = np.array([g.value(np.array([z])) for z in grid])
        for _ in range(20):
            s, y = rng.uniform(0.05, 3.0), rng.uniform(-8, 8)
            oracle = grid[int(np.argmin(on_grid + (grid - y) ** 2 / (2 * s)))]
            prox_err = max(prox_err, abs(g.prox(s, np.array([y]))[0] - oracle))

    lasso, log_lasso = make_lasso(), make_log_spectrum_lasso()
    builtins = [
        make_quadratic(QuadraticSpec([[2.0, 0.5], [0.5, 1.0]], [1.0, -1.0])),
        cond100(),
        make_random_quadratic(8, seed=1),
        make_log_spectrum_quadratic(30),
        make_least_squares(rng.standard_normal((6, 4)), rng.standard_normal(6)),
        make_zero(3),
        lasso.smooth,
        log_lasso.smooth,
    ]
    grad_err = 0.0
    for p in builtins:
        for _ in range(5):
            x = rng.standard_normal(p.dim)
            grad_err = max(grad_err, check_gradient(p, x, 1e-6))

    box_ls = CompositeProblem(
        make_least_squares(rng.standard_normal((8, 5)), rng.standard_normal(8)),
        prox_box(-np.ones(5), np.ones(5)),
    )
    gap_min = np.inf
    for comp in (lasso, log_lasso, box_ls):
        s = 1 / comp.lipschitz
        for _ in range(100):
            x = rng.standard_normal(comp.dim)
            if comp is box_ls:
                x = np.clip(x, -1, 1)  # theta(x) is infinite off the box
            y = rng.standard_normal(comp.dim)
            gap_min = min(gap_min, composite_descent_gap(comp, s, x, y))
    ok = prox_err <= 1e-4 and grad_err <= 1e-5 and gap_min >= -1e-10
    return ok, (f"prox vs grid {prox_err:.1e} <= 1e-4; gradient check {grad_err:.1e} <= 1e-5; "
                f"min descent gap {gap_min:.2e} >= -1e-10")


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def evaluate(number):
    passed, detail = CRITERIA[number]()
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(line)
    return bool(passed), line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    passed, line = evaluate(number)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


if __name__ == "__main__":
    results = [evaluate(n)[0] for n in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
