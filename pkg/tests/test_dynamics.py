import math

import numpy as np
import pytest

from ravine.diagnostics import count_oscillations, log_linear_slope
from ravine.dynamics import (
    OdeSpec,
    align_iterates,
    aligned_time,
    force_field,
    integrate,
    resolution_gap,
    rk4_path,
)
from ravine.errors import DivergedError, HvpRequired
from ravine.objective import QuadraticSpec, SmoothProblem, make_quadratic
from ravine.solvers import SolverConfig, run_nag, run_rag


def test_alignment_examples():
    assert aligned_time(10, "nag_lowres", 3.0, 0.01) == pytest.approx(1.0)
    assert aligned_time(10, "nag_highres", 3.0, 0.01) == pytest.approx(0.85)
    assert aligned_time(10, "rag_highres", 3.0, 0.01) == pytest.approx(0.95)
    with pytest.raises(ValueError):
        aligned_time(10, "euler", 3.0, 0.01)


def test_align_drops_nonpositive_times(scalar):
    t = run_nag(scalar, SolverConfig(alpha=5.0, step=0.01, max_iter=5, x_init=[1.0]))
    a = align_iterates(t, "nag_highres", 0.01)
    assert list(a.k) == [3, 4, 5, 6]
    assert np.all(a.times > 0) and a.points.shape == (4, 1)
    r = align_iterates(run_rag(scalar, SolverConfig(alpha=5.0, step=0.01, max_iter=5, x_init=[1.0])), "rag_highres", 0.01)
    assert list(r.k) == [2, 3, 4, 5, 6]


def oscillator(x0=1.0):
    """x'' = -x has the exact solution cos t."""
    return lambda t, x, v: -x


def test_rk4_fourth_order():
    errs = []
    for dt in (0.1, 0.05):
        n = round(2 / dt)
        _, X, _ = rk4_path(oscillator(), 0.0, [1.0], [0.0], dt, n)
        errs.append(abs(X[-1, 0] - math.cos(2.0)))
    assert errs[0] / errs[1] >= 12


def test_avd_equilibrium(scalar):
    run = integrate(scalar, OdeSpec("avd", x0=[0.0]), t_end=10.0, dt=0.1)
    assert np.all(run.states == 0) and np.all(run.objective == 0)
    assert run.times[0] == 1.0 and run.times[-1] == pytest.approx(10.0)


def test_hbf_dissipates(scalar):
    run = integrate(scalar, OdeSpec("hbf", x0=[1.0], gamma=0.5, t0=0.0), t_end=20.0, dt=0.05)
    energy = run.objective + 0.5 * run.velocities[:, 0] ** 2
    assert np.all(np.diff(energy) <= 1e-12)


def test_hbf_sc_exponential_rate(scalar):
    run = integrate(scalar, OdeSpec("hbf_sc", x0=[1.0], mu=1.0, t0=0.0), t_end=20.0, dt=0.01)
    assert log_linear_slope(run.times, run.objective).slope <= -1.0 + 0.1


def test_avd_rate_bounded(cond100):
    run = integrate(cond100, OdeSpec("avd", x0=[1.0, 1.0], alpha=3.0), t_end=100.0, dt=0.01)
    scaled = run.times**2 * run.objective
    assert np.max(scaled[len(scaled) // 2 :]) <= np.max(scaled[:50]) * 10


def test_din_avd_attenuates(cond100):
    kw = dict(x0=[1.0, 1.0], alpha=3.1)
    avd = integrate(cond100, OdeSpec("avd", **kw), t_end=40.0, dt=0.01)
    din = integrate(cond100, OdeSpec("din_avd", beta=1.0, **kw), t_end=40.0, dt=0.01)
    assert count_oscillations(din.objective) < count_oscillations(avd.objective)


def test_isihd_and_highres_converge(cond100):
    for spec in (
        OdeSpec("isihd", x0=[1.0, 1.0], alpha=3.1, beta=1.0, gamma=0.1),
        OdeSpec("highres", x0=[1.0, 1.0], alpha=3.0, s=1e-3),
        OdeSpec("din_avd", x0=[1.0, 1.0], alpha=3.1, beta=1.0, b_kind="one_plus_beta_over_t"),
    ):
        run = integrate(cond100, spec, t_end=40.0, dt=0.01)
        assert run.objective[-1] < 1e-2 * run.objective[0], spec.kind


def test_hvp_required():
    p = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    opaque = SmoothProblem(1, p.value, p.gradient, 1.0)
    spec = OdeSpec("din_avd", x0=[1.0], beta=1.0)
    with pytest.raises(HvpRequired):
        force_field(opaque, spec, allow_fd=False)
    # finite differences stand in by default
    fd = integrate(opaque, spec, t_end=5.0, dt=0.01)
    exact = integrate(p, spec, t_end=5.0, dt=0.01)
    assert np.max(np.abs(fd.states - exact.states)) < 1e-5


def test_spec_validation():
    with pytest.raises(ValueError):
        OdeSpec("sgd", x0=[1.0])
    with pytest.raises(ValueError):
        OdeSpec("avd", x0=[1.0], t0=0.0)
    with pytest.raises(ValueError):
        OdeSpec("hbf", x0=[1.0], gamma=-1.0, t0=0.0)
    with pytest.raises(ValueError):
        OdeSpec("avd", x0=[1.0], v0=[0.0, 0.0])
    with pytest.raises(ValueError):
        OdeSpec("din_avd", x0=[1.0], b_kind="two")


def test_integrate_validation(scalar):
    spec = OdeSpec("avd", x0=[1.0])
    with pytest.raises(ValueError):
        integrate(scalar, spec, t_end=1.0, dt=0.1)
    with pytest.raises(ValueError):
        integrate(scalar, spec, t_end=2.0, dt=0.5)
    with pytest.raises(ValueError):
        integrate(scalar, OdeSpec("avd", x0=[1.0, 1.0]), t_end=2.0, dt=0.01)


def test_divergence_partial():
    # concave, so the trajectory runs off exponentially
    p = SmoothProblem(1, lambda x: -0.5 * float(x @ x), lambda x: -x, 1.0)
    with pytest.raises(DivergedError) as info:
        integrate(p, OdeSpec("hbf", x0=[1.0], t0=0.0), t_end=1000.0, dt=0.1)
    run = info.value.partial
    assert 1 < len(run.times) < 10_000
    assert run.states.shape[0] == run.objective.size


def test_ode_run_read_only(scalar):
    run = integrate(scalar, OdeSpec("avd", x0=[1.0]), t_end=2.0, dt=0.1)
    with pytest.raises(ValueError):
        run.states[0, 0] = 2.0


@pytest.mark.parametrize("which", ["nag", "rag"])
def test_resolution_gap(scalar, which):
    coarse = resolution_gap(scalar, 3.0, 1e-2, 5.0, which)
    fine = resolution_gap(scalar, 3.0, 2.5e-3, 5.0, which)
    assert coarse.highres_err < coarse.lowres_err
    assert fine.highres_err < fine.lowres_err
    low, high = coarse.lowres_err / fine.lowres_err, coarse.highres_err / fine.highres_err
    # first order halves, second order quarters; each within a factor 2
    assert 1 <= low <= 4 and 2 <= high <= 8
    assert high / low >= 1.5
    lo, hi = coarse
    assert (lo, hi) == (coarse.lowres_err, coarse.highres_err)


def test_resolution_gap_validation(scalar):
    with pytest.raises(ValueError):
        resolution_gap(scalar, 3.0, 1e-2, 5.0, "fista")
    with pytest.raises(ValueError):
        resolution_gap(scalar, 3.0, 1e-14, 5.0)
