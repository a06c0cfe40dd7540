import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from numpy.testing import assert_allclose

from dcboost.dc_core import ConfigurationError, EvalCounter
from dcboost.inner_solver import (
    InnerConfig,
    build_dca_subproblem,
    build_ppmdc_subproblem,
    nelder_mead,
    solve_subproblem,
)
from dcboost.problems import get_card


def test_config_validation():
    with pytest.raises(ConfigurationError):
        InnerConfig(tol_x=0.0)
    with pytest.raises(ConfigurationError):
        InnerConfig(max_inner_iters=0)
    with pytest.raises(ConfigurationError):
        InnerConfig(method="newton")
    assert InnerConfig().iters_for(3) == 1200
    assert InnerConfig(max_inner_iters=7).iters_for(3) == 7


def test_subproblem_values(p62):
    xk = np.array([0.5, 1.0])
    wk = np.array([0.5, 1.0])
    psi = build_dca_subproblem(p62, xk, wk)
    x = np.array([1.0, 0.0])
    assert psi(x) == pytest.approx(p62.g_eval(x) - float(wk @ (x - xk)))
    prox = build_ppmdc_subproblem(p62, xk, wk, 2.0)
    assert prox(x) == pytest.approx(psi(x) + 1.25)
    with pytest.raises(ConfigurationError):
        build_ppmdc_subproblem(p62, xk, wk, 0.0)


def test_simplex_finds_quadratic_minimum():
    c = np.array([1.0, -2.0, 0.5])
    res = nelder_mead(lambda x: float((x - c) @ (x - c)), np.zeros(3), InnerConfig(tol_x=1e-9, tol_f=1e-12))
    assert res.converged
    assert_allclose(res.x, c, atol=1e-5)
    assert res.nfev > res.nit


def test_simplex_reports_budget_exhaustion():
    res = nelder_mead(lambda x: float(x @ x), np.full(2, 5.0), InnerConfig(max_inner_iters=3))
    assert not res.converged
    assert res.fun <= 50.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.0, 5.0))
def test_simplex_never_worsens_the_start(start, shift):
    f = lambda x: abs(x[0] - shift) + 3.0 * abs(x[1]) + 0.1 * float(x @ x)  # noqa: E731
    x0 = np.array(start)
    res = nelder_mead(f, x0, InnerConfig(max_inner_iters=50))
    assert res.fun <= f(x0)
    assert res.fun == pytest.approx(f(res.x))


def test_exact_dca_step_on_l1_problem(p62):
    # w0 = grad h(x0) = x0 for the l1 problem at sigma = 1
    xk = np.array([0.5, 1.0])
    res = solve_subproblem(p62, xk, p62.h_subgrad(xk), InnerConfig(method="exact"))
    assert_allclose(res.x, [1.0, 0.0])
    assert res.converged and res.nfev == 1


def test_simplex_agrees_with_exact(p62):
    xk = np.array([-1.0, 2.0])
    wk = p62.h_subgrad(xk)
    exact = solve_subproblem(p62, xk, wk, InnerConfig(method="exact"))
    simplex = solve_subproblem(p62, xk, wk, InnerConfig(method="simplex", tol_x=1e-9, tol_f=1e-12))
    assert_allclose(simplex.x, exact.x, atol=1e-4)
    assert simplex.fun >= exact.fun - 1e-12


def test_proximal_exact_step(smooth_quad):
    xk = np.array([0.4, -1.0])
    wk = smooth_quad.h_subgrad(xk)
    a = 0.3
    res = solve_subproblem(smooth_quad, xk, wk, InnerConfig(method="exact"), alpha=a)
    # 2x - w + a(x - xk) = 0
    assert_allclose(res.x, (wk + a * xk) / (2.0 + a))


def test_method_selection():
    p63 = get_card("p6_3").problem
    xk = np.array([0.0, 0.0])
    with pytest.raises(ConfigurationError):
        solve_subproblem(p63, xk, p63.h_subgrad(xk), InnerConfig(method="exact"))
    res = solve_subproblem(p63, xk, p63.h_subgrad(xk), InnerConfig(method="auto"))
    assert res.nfev > 1
    with pytest.raises(ConfigurationError):
        solve_subproblem(p63, xk, p63.h_subgrad(xk), InnerConfig(), alpha=-1.0)


def test_counter_accumulates(p62):
    c = EvalCounter()
    xk = np.array([3.0, 3.0])
    res = solve_subproblem(p62, xk, p62.h_subgrad(xk), InnerConfig(), counter=c)
    assert c.inner_solver_evals == res.nfev


def test_simplex_on_weighted_l1():
    f = lambda x: abs(x[0]) + 2.0 * abs(x[1])  # noqa: E731
    res = nelder_mead(f, np.array([4.0, 4.0]), InnerConfig())
    assert_allclose(res.x, [0.0, 0.0], atol=1e-5)


def test_simplex_solves_first_l1_subproblem(p62):
    xk = np.array([0.5, 1.0])
    psi = build_dca_subproblem(p62, xk, p62.h_subgrad(xk))
    res = nelder_mead(psi, xk, InnerConfig())
    assert_allclose(res.x, [1.0, 0.0], atol=1e-5)


def test_simplex_result_is_a_fixed_point(p62):
    # the first simplex pass collapses on the x2 = 0 kink short of the minimizer
    config = InnerConfig()
    xk = np.array([-3.9361, -0.93])
    wk = p62.h_subgrad(xk)
    psi = build_dca_subproblem(p62, xk, wk)
    res = nelder_mead(psi, xk, config)
    assert res.converged
    assert_allclose(res.x, p62.g_argmin(wk, 0.0), atol=1e-6)
    again = nelder_mead(psi, res.x, config)
    assert float(np.max(np.abs(again.x - res.x))) <= 10.0 * config.tol_x
    assert again.fun <= res.fun


@pytest.mark.parametrize("shift", [(0.0, 0.0), (1.5, -0.25), (-3.0, 2.0)])
def test_rerun_moves_at_most_ten_tol_x(shift):
    c = np.array(shift)
    f = lambda x: float(np.sum(np.abs(x - c))) + 0.5 * float((x - c) @ (x - c)) - 0.3 * x[0]  # noqa: E731
    config = InnerConfig()
    res = nelder_mead(f, np.array([5.0, -5.0]), config)
    again = nelder_mead(f, res.x, config)
    assert float(np.max(np.abs(again.x - res.x))) <= 10.0 * config.tol_x
