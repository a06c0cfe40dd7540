"""Test problem catalog.

Every card stores its components as printed, a deterministic subgradient
selection (sign(0) = 0, lowest-index maximizer for max terms) and the declared
modulus sigma = min(sigma_g, sigma_h / 2). With that choice the DCA descent
phi(y) <= phi(x) - sigma ||y - x||^2 holds for any subproblem output that does
not increase the subproblem objective, exact or not.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np

from .dc_core import (
    ConfigurationError,
    DcProblem,
    as_point,
    eval_phi,
    monotonicity_violations,
    sample_pairs,
    strong_convexify,
    strong_convexity_violations,
)

log = logging.getLogger("problems")

sgn = np.sign


def _sq(x: np.ndarray) -> float:
    return float(x @ x)


def _soft(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass(frozen=True)
class ProblemCard:
    id: str
    problem: DcProblem
    lambda_init_default: float
    notes: str
    convexity_verified: bool = True
    family: Optional[str] = None
    family_sigma: Optional[float] = None


# ---------- sine composite (n = 2) ----------

def _sine_family(sigma: float) -> ProblemCard:
    if not sigma > 0:
        raise ConfigurationError(f"sine family needs sigma > 0, got {sigma}")

    def u(x: np.ndarray) -> float:
        return 3.0 * x[0] + abs(x[0] - x[1]) + 2.0 * x[1]

    def g(x: np.ndarray) -> float:
        return math.sin(math.sqrt(abs(u(x)))) + sigma * _sq(x)

    def g_sub(x: np.ndarray) -> np.ndarray:
        val = u(x)
        quad = 2.0 * sigma * x
        if val == 0.0:
            return quad
        r = math.sqrt(abs(val))
        s = sgn(x[0] - x[1])
        du = np.array([3.0 + s, 2.0 - s])
        return quad + math.cos(r) / (2.0 * r) * sgn(val) * du

    t = 9.0 * math.pi ** 2 / 20.0
    prob = DcProblem(
        name="p6_1" if sigma == 5.0 else f"p6_1@{sigma:g}",
        dim=2,
        g_eval=g,
        h_eval=lambda x: sigma * _sq(x),
        h_subgrad=lambda x: 2.0 * sigma * x,
        sigma=sigma,
        g_subgrad=g_sub,
        optimum=(np.array([t, t]), -1.0),
    )
    return ProblemCard(
        id=prob.name,
        problem=prob,
        lambda_init_default=3.9,
        notes="sin(sqrt|3x1+|x1-x2|+2x2|) + sigma||x||^2 minus sigma||x||^2; g not convex at the cusp, "
              "declared sigma is h's half-modulus",
        convexity_verified=False,
        family="p6_1",
        family_sigma=sigma,
    )


# ---------- l1 plus quadratic (n = 2) ----------

def _l1_family(sigma: float) -> ProblemCard:
    if not sigma > 0.5:
        raise ConfigurationError(f"the l1 family needs sigma > 0.5 for a convex h, got {sigma}")
    c = sigma - 0.5
    shift = np.array([2.5, 0.0])

    def g(x: np.ndarray) -> float:
        return -2.5 * x[0] + abs(x[0]) + abs(x[1]) + sigma * _sq(x)

    def g_sub(x: np.ndarray) -> np.ndarray:
        return np.array([-2.5 + sgn(x[0]), sgn(x[1])]) + 2.0 * sigma * x

    def g_argmin(v: np.ndarray, tau: float) -> np.ndarray:
        return _soft(v + shift, 1.0) / (2.0 * sigma + tau)

    base = sigma == 1.0
    prob = DcProblem(
        name="p6_2" if base else f"p6_2@{sigma:g}",
        dim=2,
        g_eval=g,
        h_eval=lambda x: c * _sq(x),
        h_subgrad=lambda x: 2.0 * c * x,
        sigma=c,
        g_subgrad=g_sub,
        g_argmin=g_argmin,
        optimum=(np.array([1.5, 0.0]), -1.125),
    )
    return ProblemCard(
        id=prob.name,
        problem=prob,
        lambda_init_default=16.0,
        notes="-5/2 x1 + |x1| + |x2| + sigma||x||^2 minus (sigma - 1/2)||x||^2; exact soft-threshold subproblem",
        family="p6_2",
        family_sigma=sigma,
    )


# ---------- max of three plus quadratics (n = 2) ----------

def _p6_3() -> ProblemCard:
    def f1(x):
        return np.array([x[0] ** 4 + x[1] ** 2,
                         (2.0 - x[0]) ** 2 + (2.0 - x[1]) ** 2,
                         2.0 * math.exp(-x[0] + x[1])])

    def f1_grads(x):
        e = 2.0 * math.exp(-x[0] + x[1])
        return np.array([[4.0 * x[0] ** 3, 2.0 * x[1]],
                         [-2.0 * (2.0 - x[0]), -2.0 * (2.0 - x[1])],
                         [-e, e]])

    def f2(x):
        return np.array([x[0] ** 2 - 2.0 * x[0] + x[1] ** 2 - 4.0 * x[1] + 4.0,
                         2.0 * x[0] ** 2 - 5.0 * x[0] + x[1] ** 2 - 2.0 * x[1] + 4.0,
                         x[0] ** 2 + 2.0 * x[1] ** 2 - 4.0 * x[1] + 1.0])

    def f2_grads(x):
        return np.array([[2.0 * x[0] - 2.0, 2.0 * x[1] - 4.0],
                         [4.0 * x[0] - 5.0, 2.0 * x[1] - 2.0],
                         [2.0 * x[0], 4.0 * x[1] - 4.0]])

    pairs = ((0, 1), (1, 2), (0, 2))

    def g(x):
        return float(np.max(f1(x)) + np.sum(f2(x)))

    def g_sub(x):
        i = int(np.argmax(f1(x)))
        return f1_grads(x)[i] + f2_grads(x).sum(axis=0)

    def h_terms(x):
        v = f2(x)
        return np.array([v[a] + v[b] for a, b in pairs])

    def h(x):
        return float(np.max(h_terms(x)))

    def h_sub(x):
        a, b = pairs[int(np.argmax(h_terms(x)))]
        gr = f2_grads(x)
        return gr[a] + gr[b]

    prob = DcProblem(name="p6_3", dim=2, g_eval=g, h_eval=h, h_subgrad=h_sub, sigma=2.0,
                     g_subgrad=g_sub, optimum=(np.array([1.0, 1.0]), 2.0))
    return ProblemCard("p6_3", prob, 1.5, "max of three plus three quadratics; sigma_g >= 8, sigma_h = 4")


# ---------- piecewise linear (n = 2, n = 4) ----------

def _p6_4() -> ProblemCard:
    def g(x):
        return abs(x[0] - 1.0) + 200.0 * max(0.0, abs(x[0]) - x[1])

    def g_sub(x):
        active = 1.0 if abs(x[0]) - x[1] > 0.0 else 0.0
        return np.array([sgn(x[0] - 1.0) + 200.0 * active * sgn(x[0]), -200.0 * active])

    prob = DcProblem(
        name="p6_4", dim=2, g_eval=g,
        h_eval=lambda x: 100.0 * (abs(x[0]) - x[1]),
        h_subgrad=lambda x: np.array([100.0 * sgn(x[0]), -100.0]),
        sigma=0.0, g_subgrad=g_sub, optimum=(np.array([1.0, 1.0]), 0.0),
    )
    return ProblemCard("p6_4", prob, 5.4, "piecewise linear as printed; sigma declared 0")


def _p6_5() -> ProblemCard:
    def g(x):
        return (abs(x[0] - 1.0) + 200.0 * max(0.0, abs(x[0]) - x[1]) + 180.0 * max(0.0, abs(x[2]) - x[3])
                + abs(x[2] - 1.0) + 10.1 * (abs(x[1] - 1.0) + abs(x[3] - 1.0)) + 4.95 * abs(x[1] + x[3] - 2.0))

    def g_sub(x):
        a = 1.0 if abs(x[0]) - x[1] > 0.0 else 0.0
        b = 1.0 if abs(x[2]) - x[3] > 0.0 else 0.0
        s24 = sgn(x[1] + x[3] - 2.0)
        return np.array([
            sgn(x[0] - 1.0) + 200.0 * a * sgn(x[0]),
            -200.0 * a + 10.1 * sgn(x[1] - 1.0) + 4.95 * s24,
            180.0 * b * sgn(x[2]) + sgn(x[2] - 1.0),
            -180.0 * b + 10.1 * sgn(x[3] - 1.0) + 4.95 * s24,
        ])

    def h(x):
        return 100.0 * (abs(x[0]) - x[1]) + 90.0 * (abs(x[2]) - x[3]) + 4.95 * abs(x[1] - x[3])

    def h_sub(x):
        s = sgn(x[1] - x[3])
        return np.array([100.0 * sgn(x[0]), -100.0 + 4.95 * s, 90.0 * sgn(x[2]), -90.0 - 4.95 * s])

    prob = DcProblem(name="p6_5", dim=4, g_eval=g, h_eval=h, h_subgrad=h_sub, sigma=0.0,
                     g_subgrad=g_sub, optimum=(np.ones(4), 0.0))
    return ProblemCard("p6_5", prob, 2.8, "piecewise linear as printed; sigma declared 0")


# ---------- max of four pieces (n = 2) ----------

def _p6_6() -> ProblemCard:
    def pieces(x):
        q = x[0] ** 2 + x[1] ** 2
        return np.array([q + abs(x[1]),
                         x[0] + q + abs(x[1]) - 0.5,
                         abs(x[0] - x[1]) + abs(x[1]) - 1.0,
                         x[0] + q])

    def piece_grads(x):
        s12 = sgn(x[0] - x[1])
        s2 = sgn(x[1])
        return np.array([[2.0 * x[0], 2.0 * x[1] + s2],
                         [1.0 + 2.0 * x[0], 2.0 * x[1] + s2],
                         [s12, -s12 + s2],
                         [1.0 + 2.0 * x[0], 2.0 * x[1]]])

    def g(x):
        return abs(x[0] - 1.0) + 200.0 * max(0.0, abs(x[0]) - x[1]) + 10.0 * float(np.max(pieces(x)))

    def g_sub(x):
        a = 1.0 if abs(x[0]) - x[1] > 0.0 else 0.0
        i = int(np.argmax(pieces(x)))
        return (np.array([sgn(x[0] - 1.0) + 200.0 * a * sgn(x[0]), -200.0 * a])
                + 10.0 * piece_grads(x)[i])

    def h(x):
        return 100.0 * (abs(x[0]) - x[1]) + 10.0 * (x[0] ** 2 + x[1] ** 2 + abs(x[1]))

    def h_sub(x):
        return np.array([100.0 * sgn(x[0]) + 20.0 * x[0], -100.0 + 20.0 * x[1] + 10.0 * sgn(x[1])])

    prob = DcProblem(name="p6_6", dim=2, g_eval=g, h_eval=h, h_subgrad=h_sub, sigma=10.0,
                     g_subgrad=g_sub, optimum=(np.array([0.5, 0.5]), 0.5))
    return ProblemCard("p6_6", prob, 30.0, "third max piece never active; sigma_g = sigma_h = 20")


# ---------- quadratic plus max, l1 differences (n = 3) ----------

_P67_GRADS = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 2.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def _p6_7() -> ProblemCard:
    def pieces(x):
        return np.array([0.0, x[0] + x[1] + 2.0 * x[2] - 3.0, -x[0], -x[1], -x[2]])

    def g(x):
        return (9.0 - 8.0 * x[0] - 6.0 * x[1] - 4.0 * x[2] + 2.0 * float(np.sum(np.abs(x)))
                + 4.0 * x[0] ** 2 + 2.0 * x[1] ** 2 + 2.0 * x[2] ** 2 + 10.0 * float(np.max(pieces(x))))

    def g_sub(x):
        lin = np.array([-8.0, -6.0, -4.0]) + 2.0 * sgn(x) + np.array([8.0, 4.0, 4.0]) * x
        return lin + 10.0 * _P67_GRADS[int(np.argmax(pieces(x)))]

    def h(x):
        return abs(x[0] - x[1]) + abs(x[0] - x[2])

    def h_sub(x):
        a, b = sgn(x[0] - x[1]), sgn(x[0] - x[2])
        return np.array([a + b, -a, -b])

    prob = DcProblem(name="p6_7", dim=3, g_eval=g, h_eval=h, h_subgrad=h_sub, sigma=0.0,
                     g_subgrad=g_sub, optimum=(np.array([0.75, 1.25, 0.25]), 3.5))
    return ProblemCard("p6_7", prob, 6.6, "h piecewise linear; sigma declared 0")


# ---------- subgradient example and smooth synthetic ----------

def _sec7() -> ProblemCard:
    def f(x):
        return 0.25 * _sq(x) + abs(x[0]) + 2.0 * abs(x[1])

    def f_sub(x):
        return np.array([0.5 * x[0] + sgn(x[0]), 0.5 * x[1] + 2.0 * sgn(x[1])])

    prob = DcProblem(name="sec7_subgrad", dim=2, g_eval=f, h_eval=lambda x: 0.0,
                     h_subgrad=lambda x: np.zeros(2), sigma=0.0, g_subgrad=f_sub, h_zero=True,
                     optimum=(np.zeros(2), 0.0))
    return ProblemCard("sec7_subgrad", prob, 1.0, "(x^2+y^2)/4 + |x| + 2|y| with h = 0, for nm_subgrad")


_A = np.array([1.0, 2.0])


def _smooth_quad() -> ProblemCard:
    def h(x):
        return 0.5 * _sq(x) + abs(float(_A @ x))

    def h_sub(x):
        return x + sgn(float(_A @ x)) * _A

    prob = DcProblem(
        name="smooth_quad", dim=2,
        g_eval=_sq,
        h_eval=h,
        h_subgrad=h_sub,
        sigma=0.5,
        g_grad=lambda x: 2.0 * x,
        g_argmin=lambda v, tau: v / (2.0 + tau),
        lipschitz_L=2.0,
        optimum=(_A.copy(), -2.5),
    )
    return ProblemCard("smooth_quad", prob, 2.0, "g = ||x||^2 (L = 2), h = ||x||^2/2 + |<(1,2), x>|; x* = +-(1,2)")


_BUILDERS: Dict[str, Callable[[], ProblemCard]] = {
    "p6_1": lambda: _sine_family(5.0),
    "p6_2": lambda: _l1_family(1.0),
    "p6_3": _p6_3,
    "p6_4": _p6_4,
    "p6_5": _p6_5,
    "p6_6": _p6_6,
    "p6_7": _p6_7,
    "sec7_subgrad": _sec7,
    "smooth_quad": _smooth_quad,
}

BENCH_PROBLEMS = ("p6_1", "p6_2", "p6_3", "p6_4", "p6_5", "p6_6", "p6_7")
CARD_IDS = tuple(_BUILDERS)
FAMILIES = ("p6_1", "p6_2")


def catalog() -> List[ProblemCard]:
    return [build() for build in _BUILDERS.values()]


def lift_card(card: ProblemCard, sigma_add: float) -> ProblemCard:
    """Add (sigma_add/2)||x||^2 to both components of a card.

    Both component moduli grow by sigma_add, which is what ``strong_convexify``
    records. The card re-declares sigma by the catalog rule
    min(sigma_g, sigma_h / 2), which grows by sigma_add / 2.
    """
    lifted = strong_convexify(card.problem, sigma_add)
    declared = card.problem.sigma + 0.5 * float(sigma_add)
    return replace(
        card,
        id=lifted.name,
        problem=replace(lifted, sigma=declared),
        notes=f"{card.notes}; lifted by {float(sigma_add):g}",
    )


def sigma_family(base: ProblemCard, sigma: float) -> ProblemCard:
    """Re-decompose the sine (p6_1) or l1 (p6_2) problem with quadratic weight sigma."""
    family = base.family or base.id
    if family == "p6_1":
        return _sine_family(float(sigma))
    if family == "p6_2":
        return _l1_family(float(sigma))
    raise ConfigurationError(f"no sigma family for {base.id}; expected one of {FAMILIES}")


def get_card(card_id: str) -> ProblemCard:
    """Look up a card by id; ``p6_1@7`` and ``p6_2@7`` name family members, ``p6_4+sc1`` a lifted card."""
    if "+sc" in card_id:
        base_id, _, raw = card_id.rpartition("+sc")
        try:
            sigma_add = float(raw)
        except ValueError:
            raise KeyError(card_id) from None
        if not sigma_add > 0:
            raise KeyError(card_id)
        return lift_card(get_card(base_id), sigma_add)
    if "@" in card_id:
        base_id, _, raw = card_id.partition("@")
        if base_id not in FAMILIES:
            raise KeyError(card_id)
        try:
            sigma = float(raw)
        except ValueError:
            raise KeyError(card_id) from None
        return sigma_family(_BUILDERS[base_id](), sigma)
    try:
        return _BUILDERS[card_id]()
    except KeyError:
        raise KeyError(card_id) from None


class CardReport(NamedTuple):
    card: str
    h_violations: int
    h_monotone_violations: int
    g_violations: Optional[int]
    optimum_error: Optional[float]

    @property
    def ok(self) -> bool:
        return (self.h_violations == 0 and self.h_monotone_violations == 0 and not self.g_violations
                and (self.optimum_error is None or self.optimum_error <= 1e-12))


def verify_card(card: ProblemCard, samples: int = 200, rng: Optional[np.random.Generator] = None,
                tol: float = 1e-9) -> CardReport:
    """Sample the declared modulus on both components and check phi at the optimum."""
    p = card.problem
    rng = rng or np.random.default_rng(0)
    pairs = sample_pairs(rng, p.dim, p.init_box, samples)
    h_bad = strong_convexity_violations(p.h_eval, p.h_subgrad, p.sigma, pairs, tol)
    h_mono = monotonicity_violations(p.h_subgrad, p.sigma, pairs, tol)
    g_bad = None
    g_oracle = p.g_grad or p.g_subgrad
    if card.convexity_verified and g_oracle is not None:
        g_bad = strong_convexity_violations(p.g_eval, g_oracle, p.sigma, pairs, tol)
    opt_err = None
    if p.optimum is not None:
        opt_err = abs(eval_phi(p, as_point(p.optimum[0], p.dim)) - p.optimum[1])
    report = CardReport(card.id, h_bad, h_mono, g_bad, opt_err)
    if not report.ok:
        log.warning("card %s failed oracle checks: %s", card.id, report)
    return report
