import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ravine.errors import EmptyBox, ProxUnavailable, StepTooLarge
from ravine.objective import QuadraticSpec, SmoothProblem, make_least_squares, make_quadratic, make_random_quadratic, make_zero
from ravine.prox import (
    CompositeProblem,
    composite_descent_gap,
    forward_backward_map,
    make_lasso,
    make_log_spectrum_lasso,
    prox_box,
    prox_l1,
    prox_zero,
    resolvent,
)

GRID = np.linspace(-10, 10, 100_001)


def grid_values(g):
    return np.array([g.value(np.array([z])) for z in GRID])


def grid_argmin(g_on_grid, s, y):
    return GRID[int(np.argmin(g_on_grid + (GRID - y) ** 2 / (2 * s)))]


def test_l1_examples():
    g = prox_l1(1.0)
    assert g.prox(0.5, np.array([2.0]))[0] == 1.5
    assert g.prox(0.5, np.array([0.3]))[0] == 0.0
    y = np.array([-3.0, 0.2, 7.0])
    np.testing.assert_array_equal(prox_l1(0.0).prox(2.0, y), y)
    assert g.value(np.array([1.0, -2.0])) == 3.0
    with pytest.raises(ValueError):
        prox_l1(-1.0)


def test_zero_examples():
    g = prox_zero()
    np.testing.assert_array_equal(g.prox(1.0, np.array([3.0, 4.0])), [3.0, 4.0])
    np.testing.assert_array_equal(g.prox(1e-3, np.zeros(2)), [0.0, 0.0])
    assert g.value(np.ones(3)) == 0.0


def test_box_examples():
    g = prox_box([0.0, 0.0], [1.0, 1.0])
    np.testing.assert_array_equal(g.prox(1.0, np.array([2.0, -1.0])), [1.0, 0.0])
    np.testing.assert_array_equal(g.prox(7.0, np.array([0.25, 0.5])), [0.25, 0.5])
    c = prox_box([0.3], [0.3])
    assert c.prox(1.0, np.array([-9.0]))[0] == 0.3
    assert g.value(np.array([2.0, 0.5])) == np.inf
    assert g.value(np.array([1.0, 0.5])) == 0.0
    with pytest.raises(EmptyBox):
        prox_box([1.0], [0.0])


@pytest.mark.parametrize("g", [prox_l1(0.7), prox_zero(), prox_box([-1.5], [2.0])], ids=["l1", "zero", "box"])
def test_prox_matches_grid_oracle(g):
    rng = np.random.default_rng(4)
    on_grid = grid_values(g)
    for _ in range(20):
        s, y = rng.uniform(0.05, 3.0), rng.uniform(-8, 8)
        assert abs(g.prox(s, np.array([y]))[0] - grid_argmin(on_grid, s, y)) <= 1e-4


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.01, 10),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
)
def test_prox_nonexpansive(s, a, b):
    a, b = np.array(a), np.array(b)
    for g in (prox_l1(1.3), prox_box(-np.ones(3), np.ones(3)), prox_zero()):
        assert np.linalg.norm(g.prox(s, a) - g.prox(s, b)) <= np.linalg.norm(a - b) + 1e-12


def test_forward_backward_examples():
    half = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    smooth = CompositeProblem(half, prox_zero())
    assert forward_backward_map(smooth, 0.1, np.array([2.0]))[0] == 2.0
    l1 = CompositeProblem(make_zero(1), prox_l1(1.0))
    assert forward_backward_map(l1, 0.5, np.array([2.0]))[0] == pytest.approx(1.0)
    lasso = make_log_spectrum_lasso()
    assert np.linalg.norm(forward_backward_map(lasso, 1.0, lasso.minimizer)) <= 1e-12
    with pytest.raises(ValueError):
        forward_backward_map(smooth, 0.0, np.array([1.0]))


def test_forward_backward_is_gradient_when_g_zero(rng):
    p = make_random_quadratic(6, seed=2)
    comp = CompositeProblem(p, prox_zero())
    for _ in range(5):
        y = rng.standard_normal(6)
        np.testing.assert_array_equal(forward_backward_map(comp, 0.3, y), p.gradient(y))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_forward_backward_monotone(seed):
    rng = np.random.default_rng(seed)
    lasso = make_lasso(6, 8, lam=0.3, seed=1)
    s = 1.0 / lasso.lipschitz
    y1, y2 = rng.standard_normal(8) * 3, rng.standard_normal(8) * 3
    d = forward_backward_map(lasso, s, y1) - forward_backward_map(lasso, s, y2)
    assert d @ (y1 - y2) >= -1e-10


def test_descent_gap_examples():
    lasso = make_log_spectrum_lasso()
    x = lasso.minimizer
    assert abs(composite_descent_gap(lasso, 1.0, x, x)) <= 1e-12
    half = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    # at x = y = x* both sides vanish
    assert composite_descent_gap(half, 1.0, np.array([0.0]), np.array([0.0])) == 0.0
    assert composite_descent_gap(half, 1.0, np.array([1.0]), np.array([1.0])) == 0.0
    # x=0, y=1, s=1: the plain inequality has slack 1/2; the refined one is tight
    assert composite_descent_gap(half, 1.0, np.array([0.0]), np.array([1.0])) == pytest.approx(0.5)
    assert composite_descent_gap(half, 1.0, np.array([0.0]), np.array([1.0]), refined=True) == 0.0
    with pytest.raises(StepTooLarge, match="step.lipschitz"):
        composite_descent_gap(half, 2.0, np.zeros(1), np.ones(1))
    with pytest.raises(ValueError):
        composite_descent_gap(lasso, 1.0, x, x, refined=True)


def test_descent_gap_random_pairs_lasso(rng):
    lasso = make_lasso()
    s = 1.0 / lasso.lipschitz
    for _ in range(100):
        x, y = rng.standard_normal(20) * 2, rng.standard_normal(20) * 2
        assert composite_descent_gap(lasso, s, x, y) >= -1e-10


def test_refined_gap_nonnegative(rng):
    p = make_random_quadratic(5, seed=4)
    for _ in range(50):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        assert composite_descent_gap(p, 1.0 / p.lipschitz, x, y, refined=True) >= -1e-10


def test_resolvent_examples():
    half = make_quadratic(QuadraticSpec([[1.0]], [0.0]))
    assert resolvent(half, 0.1)(np.array([1.0]))[0] == pytest.approx(1 / 1.1)
    diag = make_quadratic(QuadraticSpec(np.diag([1.0, 2.0]), [1.0, 0.0]))
    r = resolvent(CompositeProblem(diag, prox_l1(0.5)), 1.0)
    # coordinatewise: soft(y + s b, s lam) / (1 + s a)
    np.testing.assert_allclose(r(np.array([1.0, 3.0])), [1.5 / 2.0, 2.5 / 3.0])
    r = resolvent(CompositeProblem(diag, prox_box([0.0, 0.0], [0.5, 0.5])), 1.0)
    np.testing.assert_allclose(r(np.array([1.0, 3.0])), [0.5, 0.5])
    with pytest.raises(ProxUnavailable):
        resolvent(make_lasso(), 1.0)
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    plain = make_least_squares(M, np.ones(2))
    opaque = SmoothProblem(plain.dim, plain.value, plain.gradient, plain.lipschitz)
    with pytest.raises(ProxUnavailable):
        resolvent(opaque, 1.0)


def test_lasso_is_seeded():
    a, b = make_lasso(seed=5), make_lasso(seed=5)
    x = np.linspace(-1, 1, 20)
    assert a.theta(x) == b.theta(x)
    assert a.theta(x) != make_lasso(seed=6).theta(x)
