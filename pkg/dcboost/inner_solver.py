from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from .dc_core import ConfigurationError, DcProblem, EvalCounter, as_point

log = logging.getLogger("inner_solver")

Objective = Callable[[np.ndarray], float]

INNER_METHODS = ("simplex", "exact", "auto")


@dataclass(frozen=True)
class InnerConfig:
    tol_x: float = 1e-7
    tol_f: float = 1e-7
    # None -> 400 * n
    max_inner_iters: Optional[int] = None
    method: str = "simplex"

    def __post_init__(self) -> None:
        if not self.tol_x > 0 or not self.tol_f > 0:
            raise ConfigurationError("inner tolerances must be > 0")
        if self.max_inner_iters is not None and self.max_inner_iters <= 0:
            raise ConfigurationError("max_inner_iters must be positive")
        if self.method not in INNER_METHODS:
            raise ConfigurationError(f"unknown inner method {self.method!r}, expected one of {INNER_METHODS}")

    def iters_for(self, dim: int) -> int:
        return self.max_inner_iters if self.max_inner_iters is not None else 400 * dim


class InnerResult(NamedTuple):
    x: np.ndarray
    fun: float
    nfev: int
    nit: int
    converged: bool


def build_dca_subproblem(problem: DcProblem, x_k, w_k) -> Objective:
    """psi_k(x) = g(x) - <w_k, x - x_k>."""
    xk = as_point(x_k, problem.dim, what="x_k")
    wk = as_point(w_k, problem.dim, what="w_k")
    g = problem.g_eval

    def psi(x: np.ndarray) -> float:
        return float(g(x)) - float(wk @ (x - xk))

    return psi


def build_ppmdc_subproblem(problem: DcProblem, x_k, w_k, alpha: float) -> Objective:
    if not alpha > 0:
        raise ConfigurationError(f"proximal parameter must be > 0, got {alpha}")
    xk = as_point(x_k, problem.dim, what="x_k")
    wk = as_point(w_k, problem.dim, what="w_k")
    g = problem.g_eval
    a = float(alpha)

    def psi(x: np.ndarray) -> float:
        diff = x - xk
        return float(g(x)) - float(wk @ diff) + 0.5 * a * float(diff @ diff)

    return psi


MAX_RESTARTS = 8


def _simplex_pass(f: Objective, start: np.ndarray, config: InnerConfig, maxiter: int):
    return minimize(
        f,
        start,
        method="Nelder-Mead",
        options={"xatol": config.tol_x, "fatol": config.tol_f, "maxiter": maxiter},
    )


def nelder_mead(f: Objective, x_init, config: InnerConfig) -> InnerResult:
    """Simplex search from ``x_init``, restarted until it is a fixed point.

    scipy's defaults already use reflection 1, expansion 2, contraction 0.5,
    shrink 0.5 and a 5% (0.00025 at zero) initial simplex. Its ``xatol`` bounds
    the simplex spread, not the distance to the minimizer, and near a kink the
    simplex collapses early. Each restart builds a fresh simplex around the
    current point; the search stops once a pass moves by at most ``tol_x``, and
    that pass's start is returned, so a rerun from the result reproduces it.
    ``max_inner_iters`` bounds each pass; a pass that runs out ends the search
    unconverged.

    The returned point never has a larger objective than ``x_init``: every
    pass starts from a vertex holding the best value so far.
    """
    x0 = as_point(x_init, what="x_init")
    budget = config.iters_for(x0.shape[0])
    x, fun = x0, float(f(x0))
    nfev, nit = 1, 0
    converged = False
    for restart in range(MAX_RESTARTS + 1):
        res = _simplex_pass(f, x, config, budget)
        nfev += int(res.nfev)
        nit += int(res.nit)
        cand, cand_f = np.asarray(res.x, dtype=float), float(res.fun)
        if not np.isfinite(cand_f) or cand_f > fun:
            cand, cand_f = x, fun
        if res.status != 0:
            log.debug("simplex stopped without convergence: %s", res.message)
            x, fun = cand, cand_f
            break
        move = float(np.max(np.abs(cand - x)))
        if move <= config.tol_x:
            converged = True
            break
        x, fun = cand, cand_f
        if restart == MAX_RESTARTS:
            # rounding noise at the minimizer; accept a last move within 10 tol_x
            converged = move <= 10.0 * config.tol_x
    return InnerResult(x=x, fun=fun, nfev=nfev, nit=nit, converged=converged)


def _use_exact(problem: DcProblem, config: InnerConfig) -> bool:
    if config.method == "simplex":
        return False
    if problem.g_argmin is None:
        if config.method == "exact":
            raise ConfigurationError(f"problem {problem.name} has no exact subproblem oracle")
        return False
    return True


def solve_subproblem(
    problem: DcProblem,
    x_k,
    w_k,
    config: InnerConfig,
    *,
    alpha: float = 0.0,
    counter: Optional[EvalCounter] = None,
) -> InnerResult:
    """Minimize the DCA subproblem (alpha == 0) or its proximal version (alpha > 0)."""
    xk = as_point(x_k, problem.dim, what="x_k")
    wk = as_point(w_k, problem.dim, what="w_k")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    psi = build_ppmdc_subproblem(problem, xk, wk, alpha) if alpha > 0 else build_dca_subproblem(problem, xk, wk)

    if _use_exact(problem, config):
        # argmin g - <w, x - x_k> + (a/2)||x - x_k||^2 == g_argmin(w + a x_k, a)
        y = as_point(problem.g_argmin(wk + alpha * xk, alpha), problem.dim, what="g_argmin")
        res = InnerResult(x=y, fun=float(psi(y)), nfev=1, nit=0, converged=True)
    else:
        res = nelder_mead(psi, xk, config)
        if not res.converged:
            log.warning("inner solve not converged after %d iterations (problem=%s)", res.nit, problem.name)

    if counter is not None:
        counter.inner_solver_evals += res.nfev
    return res
