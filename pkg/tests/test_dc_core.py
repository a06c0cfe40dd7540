import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from numpy.testing import assert_allclose

from dcboost.dc_core import (
    ConfigurationError,
    DcProblem,
    EvalCounter,
    EvaluationError,
    as_point,
    eval_g,
    eval_h,
    eval_phi,
    fd_directional_derivative,
    fd_gradient,
    is_smooth_at,
    monotonicity_violations,
    one_sided_gap,
    strong_convexify,
    strong_convexity_violations,
    subgrad_g,
    subgrad_h,
)
from dcboost.problems import CARD_IDS, get_card


def _quad_problem(**kw):
    base = dict(
        name="q",
        dim=2,
        g_eval=lambda x: float(x @ x),
        h_eval=lambda x: 0.5 * float(x @ x),
        h_subgrad=lambda x: x,
        sigma=0.5,
        g_grad=lambda x: 2.0 * x,
    )
    base.update(kw)
    return DcProblem(**base)


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        _quad_problem(dim=0)
    with pytest.raises(ConfigurationError):
        _quad_problem(sigma=-1.0)
    with pytest.raises(ConfigurationError):
        _quad_problem(lipschitz_L=0.0)
    with pytest.raises(ConfigurationError):
        _quad_problem(init_box=(1.0, 1.0))


def test_phi_and_counter():
    p = _quad_problem()
    c = EvalCounter()
    assert eval_phi(p, [1.0, 2.0], c) == pytest.approx(2.5)
    assert eval_g(p, [1.0, 2.0], c) == 5.0
    assert eval_h(p, [1.0, 2.0], c) == 2.5
    assert_allclose(subgrad_h(p, [1.0, 2.0], c), [1.0, 2.0])
    assert_allclose(subgrad_g(p, [1.0, 2.0], c), [2.0, 4.0])
    assert c.phi_evals == 1
    assert c.g_evals == 2
    assert c.h_evals == 2
    assert c.subgrad_evals == 2
    assert c.total == 7
    assert c.snapshot()["inner_solver_evals"] == 0


def test_non_finite_values_name_the_component():
    p = _quad_problem(g_eval=lambda x: math.inf)
    with pytest.raises(EvaluationError, match="g returned"):
        eval_phi(p, [0.0, 0.0])
    q = _quad_problem(h_subgrad=lambda x: np.array([np.nan, 0.0]))
    with pytest.raises(EvaluationError, match="h_subgrad"):
        subgrad_h(q, [0.0, 0.0])


def test_point_checks():
    with pytest.raises(EvaluationError):
        as_point([1.0, 2.0, 3.0], 2)
    with pytest.raises(EvaluationError):
        as_point([1.0, math.nan])
    p = _quad_problem()
    with pytest.raises(EvaluationError):
        eval_phi(p, [1.0])


def test_subgrad_g_needs_an_oracle():
    p = _quad_problem(g_grad=None)
    with pytest.raises(ConfigurationError):
        subgrad_g(p, [0.0, 0.0])


def test_strong_convexify_lifts_everything(smooth_quad):
    lifted = strong_convexify(smooth_quad, 3.0)
    assert lifted.sigma == pytest.approx(3.5)
    assert lifted.lipschitz_L == pytest.approx(5.0)
    assert lifted.name == "smooth_quad+sc3"
    v = np.array([1.0, -4.0])
    # argmin ||x||^2 + 1.5||x||^2 - <v, x>  ->  x = v / 5
    assert_allclose(lifted.g_argmin(v, 0.0), v / 5.0)
    x = np.array([0.3, -0.7])
    assert_allclose(lifted.g_grad(x), 5.0 * x)
    with pytest.raises(ConfigurationError):
        strong_convexify(smooth_quad, 0.0)


@pytest.mark.parametrize("card_id", CARD_IDS)
def test_strong_convexify_keeps_phi(card_id, rng):
    p = get_card(card_id).problem
    lifted = strong_convexify(p, 1.7)
    lo, hi = p.init_box
    for x in rng.uniform(lo, hi, size=(100, p.dim)):
        assert abs(eval_phi(lifted, x) - eval_phi(p, x)) <= 1e-12
        quad = 0.85 * float(x @ x)
        assert lifted.g_eval(x) == pytest.approx(p.g_eval(x) + quad, rel=1e-14, abs=1e-12)
        assert lifted.h_eval(x) == pytest.approx(p.h_eval(x) + quad, rel=1e-14, abs=1e-12)


def test_strong_convexify_twice_keeps_phi(p62):
    twice = strong_convexify(strong_convexify(p62, 1.0), 2.0)
    assert twice.sigma == pytest.approx(3.5)
    for x in ([0.3, -7.0], [9.5, 9.5], [-4.25, 0.0]):
        assert eval_phi(twice, x) == eval_phi(p62, x)


def test_fd_helpers():
    f = lambda x: float(x @ x)  # noqa: E731
    x = np.array([1.0, -2.0])
    assert fd_directional_derivative(f, x, [1.0, 0.0]) == pytest.approx(2.0, abs=1e-5)
    assert_allclose(fd_gradient(f, x), [2.0, -4.0], atol=1e-6)
    with pytest.raises(ValueError):
        fd_directional_derivative(f, x, [0.0, 0.0])
    with pytest.raises(ValueError):
        fd_directional_derivative(f, x, [1.0, 0.0], step=0.0)


def test_directional_derivatives_at_kinks(p62):
    # l1 problem at y0 = (1, 0) along d0 = (1/2, -1)
    phi = lambda z: eval_phi(p62, z)  # noqa: E731
    assert fd_directional_derivative(phi, [1.0, 0.0], [0.5, -1.0]) == pytest.approx(0.75, abs=1e-5)
    # (x^2 + y^2)/4 + |x| + 2|y| at (1, 0) along -(3/2, -2)
    f = get_card("sec7_subgrad").problem.g_eval
    assert fd_directional_derivative(f, [1.0, 0.0], [-1.5, 2.0]) == pytest.approx(1.75, abs=1e-4)


def test_kink_detection():
    f = lambda x: abs(float(x[0])) + float(x[1]) ** 2  # noqa: E731
    assert one_sided_gap(f, [0.0, 1.0], 0) == pytest.approx(2.0)
    assert not is_smooth_at(f, [0.0, 1.0])
    assert is_smooth_at(f, [0.5, 1.0])


points = st.lists(st.floats(-50, 50), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(points, points, st.floats(0.1, 10.0))
def test_quadratic_modulus_is_exact(x, y, s):
    f = lambda z: 0.5 * s * float(z @ z)  # noqa: E731
    sub = lambda z: s * z  # noqa: E731
    pair = [(np.array(x), np.array(y))]
    assert strong_convexity_violations(f, sub, s, pair, tol=1e-6) == 0
    assert monotonicity_violations(sub, s, pair, tol=1e-6) == 0


def test_overdeclared_modulus_is_caught():
    f = lambda z: float(z @ z)  # noqa: E731
    sub = lambda z: 2.0 * z  # noqa: E731
    pairs = [(np.zeros(2), np.ones(2)), (np.ones(2), -np.ones(2))]
    assert strong_convexity_violations(f, sub, 3.0, pairs) == 2
    assert monotonicity_violations(sub, 3.0, pairs) == 2
