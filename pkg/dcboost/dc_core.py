from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

log = logging.getLogger("dc_core")

Oracle = Callable[[np.ndarray], float]
VectorOracle = Callable[[np.ndarray], np.ndarray]
# (v, tau) -> argmin_x g(x) - <v, x> + (tau/2)||x||^2
ArgminOracle = Callable[[np.ndarray, float], np.ndarray]


class DcBoostError(Exception):
    pass


class EvaluationError(DcBoostError, ValueError):
    """An oracle produced a non-finite value or a point of the wrong shape."""


class ConfigurationError(DcBoostError, ValueError):
    pass


class InvariantViolation(DcBoostError, RuntimeError):
    """A checked inequality failed beyond its tolerance."""


@dataclass(frozen=True)
class DcProblem:
    """phi = g - h with g, h convex (strongly convex with modulus ``sigma`` when sigma > 0).

    ``sigma == 0`` marks components that are convex but not strongly convex as
    written. Callers that need a positive modulus check it themselves, or lift
    the decomposition with ``strong_convexify``.

    ``phi_eval`` overrides g - h when a lifted decomposition must reproduce the
    original phi bit for bit. ``h_zero`` marks problems whose h vanishes
    identically, so g alone is minimized.
    """

    name: str
    dim: int
    g_eval: Oracle
    h_eval: Oracle
    h_subgrad: VectorOracle
    sigma: float
    g_grad: Optional[VectorOracle] = None
    g_subgrad: Optional[VectorOracle] = None
    g_argmin: Optional[ArgminOracle] = None
    lipschitz_L: Optional[float] = None
    optimum: Optional[Tuple[np.ndarray, float]] = None
    init_box: Tuple[float, float] = (-10.0, 10.0)
    phi_eval: Optional[Oracle] = None
    h_zero: bool = False

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ConfigurationError(f"problem {self.name}: dim must be positive, got {self.dim}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ConfigurationError(f"problem {self.name}: sigma must be >= 0, got {self.sigma}")
        if self.lipschitz_L is not None and self.lipschitz_L <= 0:
            raise ConfigurationError(f"problem {self.name}: lipschitz_L must be > 0")
        lo, hi = self.init_box
        if not lo < hi:
            raise ConfigurationError(f"problem {self.name}: empty init_box {self.init_box}")

    @property
    def smooth_g(self) -> bool:
        return self.g_grad is not None

    @property
    def x_star(self) -> Optional[np.ndarray]:
        return None if self.optimum is None else self.optimum[0]

    @property
    def phi_star(self) -> Optional[float]:
        return None if self.optimum is None else float(self.optimum[1])


@dataclass
class EvalCounter:
    phi_evals: int = 0
    g_evals: int = 0
    h_evals: int = 0
    subgrad_evals: int = 0
    inner_solver_evals: int = 0

    @property
    def total(self) -> int:
        return self.phi_evals + self.g_evals + self.h_evals + self.subgrad_evals + self.inner_solver_evals

    def snapshot(self) -> Dict[str, int]:
        return dataclasses.asdict(self)


def as_point(x, dim: Optional[int] = None, *, what: str = "x") -> np.ndarray:
    p = np.array(x, dtype=float).reshape(-1)
    if dim is not None and p.shape[0] != dim:
        raise EvaluationError(f"{what}: expected dimension {dim}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise EvaluationError(f"{what}: non-finite coordinates {p.tolist()}")
    return p


def _finite_scalar(value, component: str, x: np.ndarray) -> float:
    v = float(value)
    if not np.isfinite(v):
        raise EvaluationError(f"{component} returned non-finite value {v} at x={x.tolist()}")
    return v


def _finite_vector(value, component: str, x: np.ndarray) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.shape != x.shape:
        raise EvaluationError(f"{component} returned shape {v.shape}, expected {x.shape}")
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{component} returned non-finite vector at x={x.tolist()}")
    return v


def eval_g(problem: DcProblem, x, counter: Optional[EvalCounter] = None) -> float:
    p = as_point(x, problem.dim)
    if counter is not None:
        counter.g_evals += 1
    return _finite_scalar(problem.g_eval(p), "g", p)


def eval_h(problem: DcProblem, x, counter: Optional[EvalCounter] = None) -> float:
    p = as_point(x, problem.dim)
    if counter is not None:
        counter.h_evals += 1
    return _finite_scalar(problem.h_eval(p), "h", p)


def eval_phi(problem: DcProblem, x, counter: Optional[EvalCounter] = None) -> float:
    p = as_point(x, problem.dim)
    if counter is not None:
        counter.phi_evals += 1
        counter.g_evals += 1
        counter.h_evals += 1
    if problem.phi_eval is not None:
        return _finite_scalar(problem.phi_eval(p), "phi", p)
    g = _finite_scalar(problem.g_eval(p), "g", p)
    h = _finite_scalar(problem.h_eval(p), "h", p)
    return _finite_scalar(g - h, "phi", p)


def subgrad_h(problem: DcProblem, x, counter: Optional[EvalCounter] = None) -> np.ndarray:
    p = as_point(x, problem.dim)
    if counter is not None:
        counter.subgrad_evals += 1
    return _finite_vector(problem.h_subgrad(p), "h_subgrad", p)


def subgrad_g(problem: DcProblem, x, counter: Optional[EvalCounter] = None) -> np.ndarray:
    p = as_point(x, problem.dim)
    oracle = problem.g_grad or problem.g_subgrad
    if oracle is None:
        raise ConfigurationError(f"problem {problem.name} has no gradient or subgradient oracle for g")
    if counter is not None:
        counter.subgrad_evals += 1
    return _finite_vector(oracle(p), "g_subgrad", p)


def strong_convexify(problem: DcProblem, sigma_add: float) -> DcProblem:
    """Add (sigma_add/2)||x||^2 to both components; phi is unchanged pointwise."""
    if not sigma_add > 0:
        raise ConfigurationError(f"sigma_add must be > 0, got {sigma_add}")
    s = float(sigma_add)
    base = problem
    log.debug("lifting %s: sigma %g -> %g", base.name, base.sigma, base.sigma + s)

    def g(x: np.ndarray) -> float:
        return base.g_eval(x) + 0.5 * s * float(x @ x)

    def h(x: np.ndarray) -> float:
        return base.h_eval(x) + 0.5 * s * float(x @ x)

    def h_sub(x: np.ndarray) -> np.ndarray:
        return np.asarray(base.h_subgrad(x), dtype=float) + s * x

    g_grad = None
    if base.g_grad is not None:
        def g_grad(x: np.ndarray) -> np.ndarray:
            return np.asarray(base.g_grad(x), dtype=float) + s * x

    g_sub = None
    if base.g_subgrad is not None:
        def g_sub(x: np.ndarray) -> np.ndarray:
            return np.asarray(base.g_subgrad(x), dtype=float) + s * x

    g_argmin = None
    if base.g_argmin is not None:
        def g_argmin(v: np.ndarray, tau: float) -> np.ndarray:
            return base.g_argmin(v, tau + s)

    base_phi = base.phi_eval
    if base_phi is None:
        def base_phi(x: np.ndarray) -> float:
            return base.g_eval(x) - base.h_eval(x)

    return dataclasses.replace(
        base,
        name=f"{base.name}+sc{s:g}",
        g_eval=g,
        h_eval=h,
        h_subgrad=h_sub,
        g_grad=g_grad,
        g_subgrad=g_sub,
        g_argmin=g_argmin,
        sigma=base.sigma + s,
        lipschitz_L=None if base.lipschitz_L is None else base.lipschitz_L + s,
        phi_eval=base_phi,
        h_zero=False,
    )


# ---------- finite differences ----------

def fd_directional_derivative(f: Oracle, x, d, step: float = 1e-6) -> float:
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    p = as_point(x)
    dv = as_point(d, p.shape[0], what="d")
    if not np.any(dv):
        raise ValueError("direction must be non-zero")
    val = (float(f(p + step * dv)) - float(f(p))) / step
    if not np.isfinite(val):
        raise EvaluationError(f"directional difference is non-finite at x={p.tolist()}")
    return val


def fd_gradient(f: Oracle, x, step: float = 1e-6) -> np.ndarray:
    p = as_point(x)
    out = np.empty_like(p)
    for i in range(p.shape[0]):
        e = np.zeros_like(p)
        e[i] = step
        out[i] = (float(f(p + e)) - float(f(p - e))) / (2.0 * step)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"central differences non-finite at x={p.tolist()}")
    return out


def one_sided_gap(f: Oracle, x, i: int, step: float = 1e-6) -> float:
    """|forward quotient - backward quotient| along coordinate i; large near kinks."""
    p = as_point(x)
    e = np.zeros_like(p)
    e[i] = step
    fx = float(f(p))
    fwd = (float(f(p + e)) - fx) / step
    bwd = (fx - float(f(p - e))) / step
    return abs(fwd - bwd)


def is_smooth_at(f: Oracle, x, step: float = 1e-6, threshold: float = 1e-3) -> bool:
    p = as_point(x)
    return all(one_sided_gap(f, p, i, step) <= threshold for i in range(p.shape[0]))


# ---------- sampling checks ----------

Pairs = Iterable[Tuple[np.ndarray, np.ndarray]]


def strong_convexity_violations(f: Oracle, subgrad: VectorOracle, sigma: float, pairs: Pairs,
                                tol: float = 1e-9) -> int:
    """Count pairs breaking f(y) >= f(x) + <s(x), y-x> + (sigma/2)||y-x||^2 - tol."""
    bad = 0
    for x, y in pairs:
        diff = y - x
        lower = float(f(x)) + float(np.dot(subgrad(x), diff)) + 0.5 * sigma * float(diff @ diff)
        if float(f(y)) < lower - tol:
            bad += 1
    return bad


def monotonicity_violations(subgrad: VectorOracle, sigma: float, pairs: Pairs, tol: float = 1e-9) -> int:
    bad = 0
    for x, y in pairs:
        diff = x - y
        if float(np.dot(np.asarray(subgrad(x)) - np.asarray(subgrad(y)), diff)) < sigma * float(diff @ diff) - tol:
            bad += 1
    return bad


def sample_pairs(rng: np.random.Generator, dim: int, box: Tuple[float, float], n: int):
    lo, hi = box
    xs = rng.uniform(lo, hi, size=(n, dim))
    ys = rng.uniform(lo, hi, size=(n, dim))
    return list(zip(xs, ys))
