from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .dc_core import (
    ConfigurationError,
    DcProblem,
    EvaluationError,
    EvalCounter,
    InvariantViolation,
    Oracle,
    VectorOracle,
    as_point,
    eval_g,
    eval_phi,
    subgrad_h,
)
from .inner_solver import InnerConfig, solve_subproblem
from .nu_strategies import NuContext, NuSpec, NuState, Zero, can_vanish, nu_update, nu_value

log = logging.getLogger("solvers")

SOLVERS = ("dca", "bdca", "nmbdca", "ppmdc", "nm_subgrad")
TERMINATIONS = ("converged", "critical_point", "max_iters", "line_search_fallback_exhausted")
STEP_RESTARTS = ("previous", "initial")


@dataclass(frozen=True)
class SolverConfig:
    lambda_init: float = 1.0
    rho: float = 0.5
    zeta: float = 0.5
    stop_tol: float = 1e-7
    max_outer_iters: int = 5000
    max_backtracks: int = 60
    nu_strategy: NuSpec = field(default_factory=NuSpec)
    inner: InnerConfig = field(default_factory=InnerConfig)
    alpha: float = 0.01
    # "previous": search from lambda_{k-1}; "initial": search from lambda_init every time
    step_restart: str = "previous"
    crit_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.lambda_init > 0:
            raise ConfigurationError(f"lambda_init must be > 0, got {self.lambda_init}")
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be > 0, got {self.rho}")
        if not 0 < self.zeta < 1:
            raise ConfigurationError(f"zeta must lie in (0, 1), got {self.zeta}")
        if not self.stop_tol > 0:
            raise ConfigurationError("stop_tol must be > 0")
        if self.max_outer_iters <= 0 or self.max_backtracks <= 0:
            raise ConfigurationError("iteration and backtrack caps must be positive")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.step_restart not in STEP_RESTARTS:
            raise ConfigurationError(f"step_restart must be one of {STEP_RESTARTS}")


@dataclass(frozen=True)
class IterRecord:
    k: int
    x_k: np.ndarray
    y_k: np.ndarray
    d_k: np.ndarray
    w_k: np.ndarray
    phi_x: float
    phi_y: float
    phi_next: float
    lambda_k: float
    j_k: int
    nu_k: float
    evals: Dict[str, int]
    wall_time: float
    lambda_base: float = 0.0
    step_norm: float = 0.0
    delta_next: Optional[float] = None
    inner_converged: bool = True
    fallback: bool = False

    @property
    def d_norm(self) -> float:
        return float(np.linalg.norm(self.d_k))


@dataclass
class Trace:
    records: List[IterRecord]
    termination: str
    final_x: np.ndarray
    solver: str = ""
    problem: str = ""
    x0: Optional[np.ndarray] = None
    config: Optional[SolverConfig] = None
    elapsed: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def phi_values(self) -> List[float]:
        return [r.phi_x for r in self.records]

    @property
    def final_phi(self) -> float:
        return self.records[-1].phi_next if self.records else float("nan")


class LineSearchResult(NamedTuple):
    lam: float
    j: int
    evals: int
    phi: float


# ---------- line searches ----------

def _backtrack(
    phi: Oracle,
    base: np.ndarray,
    direction: np.ndarray,
    phi_base: float,
    lambda_prev: float,
    zeta: float,
    max_backtracks: int,
    decrease: Callable[[float], float],
    nu: float,
) -> LineSearchResult:
    evals = 0
    for j in range(max_backtracks + 1):
        lam = lambda_prev * zeta ** j
        val = float(phi(base + lam * direction))
        evals += 1
        if val <= phi_base - decrease(lam) + nu:
            return LineSearchResult(lam, j, evals, val)
    return LineSearchResult(0.0, max_backtracks + 1, evals, phi_base)


def line_search(
    phi: Oracle,
    y,
    d,
    lambda_prev: float,
    rho: float,
    zeta: float,
    nu: float,
    max_backtracks: int = 60,
    *,
    phi_y: Optional[float] = None,
) -> LineSearchResult:
    """Smallest j with phi(y + zeta^j lambda_prev d) <= phi(y) - rho (zeta^j lambda_prev)^2 ||d||^2 + nu.

    Returns lam == 0 and j == max_backtracks + 1 when no trial passes.
    """
    if not lambda_prev > 0:
        raise ConfigurationError(f"lambda_prev must be > 0, got {lambda_prev}")
    if nu < 0:
        raise ConfigurationError(f"nu must be >= 0, got {nu}")
    yv = as_point(y, what="y")
    dv = as_point(d, yv.shape[0], what="d")
    dd = float(dv @ dv)
    base_evals = 0
    if phi_y is None:
        phi_y = float(phi(yv))
        base_evals = 1
    res = _backtrack(phi, yv, dv, phi_y, lambda_prev, zeta, max_backtracks, lambda lam: rho * lam * lam * dd, nu)
    return res._replace(evals=res.evals + base_evals)


def subgradient_line_search(
    f: Oracle,
    x: np.ndarray,
    s: np.ndarray,
    lambda_prev: float,
    rho: float,
    zeta: float,
    nu: float,
    max_backtracks: int,
    f_x: float,
) -> LineSearchResult:
    """Linear-decrease rule: f(x - lam s) <= f(x) - rho lam ||s||^2 + nu."""
    ss = float(s @ s)
    return _backtrack(f, x, -s, f_x, lambda_prev, zeta, max_backtracks, lambda lam: rho * lam * ss, nu)


# ---------- DCA family ----------

def _record_dca_like(k, x, y, w, phi_x, phi_y, counter, t0, inner_ok) -> IterRecord:
    d = y - x
    return IterRecord(
        k=k, x_k=x, y_k=y, d_k=d, w_k=w,
        phi_x=phi_x, phi_y=phi_y, phi_next=phi_y,
        lambda_k=0.0, j_k=0, nu_k=0.0,
        evals=counter.snapshot(), wall_time=time.monotonic() - t0,
        step_norm=float(np.linalg.norm(d)), inner_converged=inner_ok,
    )


def _plain_iteration(problem: DcProblem, x0, config: SolverConfig, alpha: float, solver: str) -> Trace:
    counter = EvalCounter()
    x = as_point(x0, problem.dim, what="x0")
    start = x.copy()
    phi_x = eval_phi(problem, x, counter)
    records: List[IterRecord] = []
    termination = "max_iters"
    t0 = time.monotonic()
    for k in range(config.max_outer_iters):
        w = subgrad_h(problem, x, counter)
        inner = solve_subproblem(problem, x, w, config.inner, alpha=alpha, counter=counter)
        y = inner.x
        phi_y = eval_phi(problem, y, counter)
        rec = _record_dca_like(k, x, y, w, phi_x, phi_y, counter, t0, inner.converged)
        records.append(rec)
        log.debug("%s k=%d phi=%.12g |d|=%.3e", solver, k, phi_x, rec.d_norm)
        x, phi_x = y, phi_y
        if rec.d_norm <= config.crit_tol:
            termination = "critical_point"
            break
        if rec.step_norm < config.stop_tol:
            termination = "converged"
            break
    return Trace(records, termination, x, solver=solver, problem=problem.name, x0=start,
                 config=config, elapsed=time.monotonic() - t0)


def dca(problem: DcProblem, x0, config: SolverConfig) -> Trace:
    return _plain_iteration(problem, x0, config, 0.0, "dca")


def ppmdc(problem: DcProblem, x0, config: SolverConfig, alpha: Optional[float] = None) -> Trace:
    a = config.alpha if alpha is None else alpha
    if not a > 0:
        raise ConfigurationError(f"proximal parameter must be > 0, got {a}")
    return _plain_iteration(problem, x0, config, a, "ppmdc")


def _boosted(problem: DcProblem, x0, config: SolverConfig, state: NuState, solver: str) -> Trace:
    if not problem.smooth_g and can_vanish(state):
        raise ConfigurationError(
            f"{type(state).__name__} may give nu_k = 0, which needs a differentiable g (problem {problem.name})"
        )
    counter = EvalCounter()
    x = as_point(x0, problem.dim, what="x0")
    start = x.copy()
    phi_x = eval_phi(problem, x, counter)
    phi_history: List[float] = [phi_x]
    phi = lambda z: eval_phi(problem, z, counter)  # noqa: E731

    lam_base = config.lambda_init
    last_positive = config.lambda_init
    nu_prev = 0.0
    records: List[IterRecord] = []
    termination = "max_iters"
    t0 = time.monotonic()

    for k in range(config.max_outer_iters):
        w = subgrad_h(problem, x, counter)
        inner = solve_subproblem(problem, x, w, config.inner, counter=counter)
        y = inner.x
        d = y - x
        phi_y = eval_phi(problem, y, counter)
        ctx = NuContext(
            k=k, d_k=d, lambda_prev=lam_base, rho=config.rho, zeta=config.zeta,
            sigma=problem.sigma, phi_history=phi_history, nu_prev=nu_prev, smooth_g=problem.smooth_g,
        )
        nu = nu_value(state, ctx)
        d_norm = float(np.linalg.norm(d))

        if d_norm <= config.crit_tol:
            records.append(IterRecord(
                k=k, x_k=x, y_k=y, d_k=d, w_k=w, phi_x=phi_x, phi_y=phi_y, phi_next=phi_y,
                lambda_k=0.0, j_k=0, nu_k=nu, evals=counter.snapshot(), wall_time=time.monotonic() - t0,
                lambda_base=lam_base, step_norm=d_norm, inner_converged=inner.converged,
            ))
            x, termination = y, "critical_point"
            break

        ls = line_search(phi, y, d, lam_base, config.rho, config.zeta, nu, config.max_backtracks, phi_y=phi_y)
        fallback = ls.lam == 0.0
        if fallback:
            log.warning("%s k=%d: line search exhausted %d backtracks, keeping y", solver, k, config.max_backtracks)
        x_next = y + ls.lam * d
        state = nu_update(state, ls.phi, dataclasses.replace(ctx, lambda_k=ls.lam))
        step = float(np.linalg.norm(x_next - x))
        records.append(IterRecord(
            k=k, x_k=x, y_k=y, d_k=d, w_k=w, phi_x=phi_x, phi_y=phi_y, phi_next=ls.phi,
            lambda_k=ls.lam, j_k=ls.j, nu_k=nu, evals=counter.snapshot(), wall_time=time.monotonic() - t0,
            lambda_base=lam_base, step_norm=step, delta_next=state.delta_next,
            inner_converged=inner.converged, fallback=fallback,
        ))
        log.debug("%s k=%d phi=%.12g |d|=%.3e lambda=%g j=%d nu=%.3e", solver, k, phi_x, d_norm, ls.lam, ls.j, nu)

        if not fallback:
            last_positive = ls.lam
        lam_base = last_positive if config.step_restart == "previous" else config.lambda_init
        nu_prev = nu
        x, phi_x = x_next, ls.phi
        phi_history.append(phi_x)
        if step < config.stop_tol:
            termination = "converged"
            break

    return Trace(records, termination, x, solver=solver, problem=problem.name, x0=start,
                 config=config, elapsed=time.monotonic() - t0)


def nmbdca(problem: DcProblem, x0, config: SolverConfig, *, nu_state: Optional[NuState] = None) -> Trace:
    state = config.nu_strategy.make() if nu_state is None else nu_state
    return _boosted(problem, x0, config, state, "nmbdca")


def bdca_monotone(problem: DcProblem, x0, config: SolverConfig) -> Trace:
    if not problem.smooth_g:
        raise ConfigurationError(f"monotone BDCA needs a differentiable g; problem {problem.name} has none")
    return _boosted(problem, x0, config, Zero(), "bdca")


def nm_subgradient(f: Oracle, subgrad_f: VectorOracle, x0, config: SolverConfig, *, name: str = "f") -> Trace:
    """Non-monotone subgradient descent x^{k+1} = x^k - lambda_k s^k."""
    state = config.nu_strategy.make()
    if can_vanish(state):
        raise ConfigurationError("the subgradient method needs nu_k > 0; pick a decaying or summable rule")
    counter = EvalCounter()
    x = as_point(x0, what="x0")
    start = x.copy()

    def fc(z: np.ndarray) -> float:
        counter.phi_evals += 1
        v = float(f(z))
        if not math.isfinite(v):
            raise EvaluationError(f"objective non-finite at {z.tolist()}")
        return v

    f_x = fc(x)
    phi_history: List[float] = [f_x]
    lam_base = config.lambda_init
    last_positive = config.lambda_init
    records: List[IterRecord] = []
    termination = "max_iters"
    t0 = time.monotonic()

    for k in range(config.max_outer_iters):
        counter.subgrad_evals += 1
        s = as_point(subgrad_f(x), x.shape[0], what="subgradient")
        s_norm = float(np.linalg.norm(s))
        ctx = NuContext(k=k, d_k=s, lambda_prev=lam_base, rho=config.rho, zeta=config.zeta,
                        sigma=0.0, phi_history=phi_history, smooth_g=False)
        nu = nu_value(state, ctx)
        if s_norm <= config.crit_tol:
            records.append(IterRecord(
                k=k, x_k=x, y_k=x, d_k=-s, w_k=s, phi_x=f_x, phi_y=f_x, phi_next=f_x,
                lambda_k=0.0, j_k=0, nu_k=nu, evals=counter.snapshot(), wall_time=time.monotonic() - t0,
                lambda_base=lam_base, step_norm=0.0,
            ))
            termination = "critical_point"
            break
        ls = subgradient_line_search(fc, x, s, lam_base, config.rho, config.zeta, nu, config.max_backtracks, f_x)
        fallback = ls.lam == 0.0
        x_next = x - ls.lam * s
        state = nu_update(state, ls.phi, dataclasses.replace(ctx, lambda_k=ls.lam))
        step = ls.lam * s_norm
        records.append(IterRecord(
            k=k, x_k=x, y_k=x, d_k=-s, w_k=s, phi_x=f_x, phi_y=f_x, phi_next=ls.phi,
            lambda_k=ls.lam, j_k=ls.j, nu_k=nu, evals=counter.snapshot(), wall_time=time.monotonic() - t0,
            lambda_base=lam_base, step_norm=step, delta_next=state.delta_next, fallback=fallback,
        ))
        if fallback:
            log.warning("nm_subgrad k=%d: no acceptable step within %d backtracks", k, config.max_backtracks)
            termination = "line_search_fallback_exhausted"
            break
        last_positive = ls.lam
        lam_base = last_positive if config.step_restart == "previous" else config.lambda_init
        x, f_x = x_next, ls.phi
        phi_history.append(f_x)
        if step < config.stop_tol:
            termination = "converged"
            break

    return Trace(records, termination, x, solver="nm_subgrad", problem=name, x0=start,
                 config=config, elapsed=time.monotonic() - t0)


def solve(name: str, problem: DcProblem, x0, config: SolverConfig) -> Trace:
    if name == "dca":
        return dca(problem, x0, config)
    if name == "bdca":
        return bdca_monotone(problem, x0, config)
    if name == "nmbdca":
        return nmbdca(problem, x0, config)
    if name == "ppmdc":
        return ppmdc(problem, x0, config)
    if name == "nm_subgrad":
        oracle = problem.g_subgrad or problem.g_grad
        if oracle is None:
            raise ConfigurationError(f"problem {problem.name} has no subgradient oracle for g")
        if not problem.h_zero:
            raise ConfigurationError(f"nm_subgrad minimizes g alone; problem {problem.name} has a non-zero h")
        return nm_subgradient(problem.g_eval, oracle, x0, config, name=problem.name)
    raise ConfigurationError(f"unknown solver {name!r}, expected one of {SOLVERS}")


# ---------- diagnostics ----------

def lambda_min(problem: DcProblem, config: SolverConfig) -> float:
    if problem.lipschitz_L is None:
        raise ConfigurationError(f"problem {problem.name} declares no Lipschitz constant")
    return min(config.lambda_init, 2.0 * config.zeta * problem.sigma / (problem.lipschitz_L + 2.0 * config.rho))


def diagnostics_step_bound(problem: DcProblem, x_k, y_k, nu_k: float, rho: float) -> Tuple[float, float]:
    """Return (delta_hat, delta) with delta = min(delta_hat, 1, 3 sigma / (2 rho))."""
    x = as_point(x_k, problem.dim, what="x_k")
    y = as_point(y_k, problem.dim, what="y_k")
    d = y - x
    dd = float(d @ d)
    if dd == 0.0:
        raise ConfigurationError("step bound needs d != 0")
    if not nu_k > 0:
        raise ConfigurationError(f"step bound needs nu_k > 0, got {nu_k}")
    denom = eval_g(problem, y + d) + eval_g(problem, x) - 2.0 * eval_g(problem, y)
    if denom < problem.sigma * dd - 1e-9:
        raise InvariantViolation(
            f"g midpoint gap {denom:.6g} below sigma*||d||^2 = {problem.sigma * dd:.6g}; sigma declaration is broken"
        )
    delta_hat = nu_k / denom if denom > 0 else math.inf
    return delta_hat, min(delta_hat, 1.0, 3.0 * problem.sigma / (2.0 * rho))


def diagnostics_eval_bound(trace: Trace, lambda_min: float, zeta: float, lambda_init: float,
                           k: Optional[int] = None) -> Tuple[int, float]:
    """J_k = sum_{l <= k} (j_l + 2) and its bound 2(k+1) + log(lambda_min/lambda_init)/log(zeta)."""
    if not trace.records:
        return 0, 0.0
    kk = len(trace.records) - 1 if k is None else k
    J = sum(r.j_k + 2 for r in trace.records[: kk + 1])
    bound = 2.0 * (kk + 1) + (math.log(lambda_min) - math.log(lambda_init)) / math.log(zeta)
    return J, bound


def descent_violations(trace: Trace, sigma: float, tol: float = 1e-8) -> int:
    """Replay DCA descent and, for boosted runs, the combined descent with nu_k."""
    if trace.solver == "nm_subgrad":
        return 0
    rho = trace.config.rho if trace.config is not None else 0.0
    bad = 0
    for r in trace.records:
        dd = float(r.d_k @ r.d_k)
        if r.phi_y > r.phi_x - sigma * dd + tol:
            bad += 1
            continue
        if trace.solver in ("nmbdca", "bdca"):
            if r.phi_next > r.phi_x - (sigma + rho * r.lambda_k ** 2) * dd + r.nu_k + tol:
                bad += 1
    return bad


def s1_violations(trace: Trace, tol: float = 1e-10) -> int:
    bad = 0
    recs = trace.records
    for cur, nxt in zip(recs, recs[1:]):
        if cur.delta_next is None:
            continue
        budget = (1.0 - cur.delta_next) * (cur.phi_x - cur.phi_next + cur.nu_k)
        if nxt.nu_k < -tol or nxt.nu_k > budget + tol:
            bad += 1
    return bad


def merit_increases(trace: Trace, tol: float = 1e-10) -> int:
    """Count k where phi(x^k) + nu_k went up."""
    vals = [r.phi_x + r.nu_k for r in trace.records]
    return sum(1 for a, b in zip(vals, vals[1:]) if b > a + tol)


def complexity_bound(trace: Trace, sigma: float, phi_lower: Optional[float] = None) -> Tuple[float, float]:
    """(min_k ||d^k||, sqrt((phi(x^0) - phi_low + sum nu)/(sigma N)) + 1e-6)."""
    if not sigma > 0:
        raise ConfigurationError("complexity bound needs sigma > 0")
    recs = trace.records
    if not recs:
        raise ConfigurationError("empty trace")
    phi_low = min(min(r.phi_x for r in recs), recs[-1].phi_next) if phi_lower is None else phi_lower
    total_nu = sum(r.nu_k for r in recs)
    min_d = min(r.d_norm for r in recs)
    bound = math.sqrt(max(0.0, recs[0].phi_x - phi_low + total_nu) / (sigma * len(recs))) + 1e-6
    return min_d, bound


def descent_lemma_gap(problem: DcProblem, x, d, lam: float) -> float:
    """Upper model minus phi(x + lam d); negative values contradict the smooth DC descent lemma."""
    if problem.g_grad is None or problem.lipschitz_L is None:
        raise ConfigurationError(f"problem {problem.name} lacks grad g or L")
    xv = as_point(x, problem.dim)
    dv = as_point(d, problem.dim, what="d")
    w = subgrad_h(problem, xv)
    model = (eval_phi(problem, xv) + lam * float((problem.g_grad(xv) - w) @ dv)
             + 0.5 * (problem.lipschitz_L - problem.sigma) * lam * lam * float(dv @ dv))
    return model - eval_phi(problem, xv + lam * dv)


def stationarity_residuals(problem: DcProblem, trace: Trace) -> List[Tuple[float, float]]:
    """Per record: (||grad g(x^k) - grad g(y^k)||, L ||d^k||)."""
    if problem.g_grad is None or problem.lipschitz_L is None:
        raise ConfigurationError(f"problem {problem.name} lacks grad g or L")
    return [
        (float(np.linalg.norm(problem.g_grad(r.x_k) - problem.g_grad(r.y_k))), problem.lipschitz_L * r.d_norm)
        for r in trace.records
    ]


def step_consistency_violations(trace: Trace) -> int:
    """lambda_k == zeta^j_k * lambda_base on every accepted (non-fallback) step."""
    if trace.config is None:
        return 0
    z = trace.config.zeta
    return sum(
        1 for r in trace.records
        if r.lambda_k > 0 and r.lambda_k != r.lambda_base * z ** r.j_k
    )
