"""Ravine and Nesterov accelerated gradient methods, their inertial dynamics and diagnostics."""

__version__ = "0.1.0"

from .diagnostics import (
    EnergyRecord,
    EnergySeries,
    RateReport,
    count_oscillations,
    energy_nag,
    energy_rag,
    estimate_min,
    geometric_ratio,
    log_linear_slope,
    min_grad_rate,
    rate_slope,
    summability,
)
from .dynamics import OdeRun, OdeSpec, align_iterates, integrate, resolution_gap
from .errors import *  # noqa: F401,F403
from .objective import (
    QuadraticSpec,
    SmoothProblem,
    check_gradient,
    hvp_or_fd,
    make_ill_conditioned_2d,
    make_least_squares,
    make_log_spectrum_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_zero,
)
from .prox import (
    CompositeProblem,
    ProxFriendly,
    composite_descent_gap,
    forward_backward_map,
    make_lasso,
    make_log_spectrum_lasso,
    prox_box,
    prox_l1,
    prox_zero,
)
from .solvers import (
    SolverConfig,
    Trace,
    nag_rag_equivalence_residual,
    run_fista_like,
    run_gd,
    run_heavy_ball,
    run_igahd,
    run_inertial_prox,
    run_nag,
    run_rag,
    run_rapg,
    run_sc,
    run_scheme,
)
