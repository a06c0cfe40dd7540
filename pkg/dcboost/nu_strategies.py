from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from .dc_core import ConfigurationError


@dataclass(frozen=True)
class NuContext:
    k: int
    d_k: np.ndarray
    lambda_prev: float
    rho: float
    zeta: float
    sigma: float
    phi_history: Sequence[float]
    nu_prev: float = 0.0
    # accepted step of iteration k, known only when updating
    lambda_k: float = 0.0
    smooth_g: bool = True

    @property
    def d_norm_sq(self) -> float:
        return float(self.d_k @ self.d_k)

    @property
    def phi_k(self) -> float:
        return float(self.phi_history[-1])


# ---------- states ----------

@dataclass(frozen=True)
class Zero:
    delta_next: Optional[float] = None


@dataclass(frozen=True)
class Summable:
    """nu_k = nu0 * ratio**k."""

    nu0: float = 1.0
    ratio: float = 0.5
    delta_next: Optional[float] = None

    @property
    def budget(self) -> float:
        return self.nu0 / (1.0 - self.ratio)


@dataclass(frozen=True)
class ZhangHager:
    """Cost averaging: Q' = eta*Q + 1, C' = (eta*Q*C + phi') / Q', nu = C - phi."""

    eta: float = 0.5
    C: Optional[float] = None  # None -> phi(x^0) + 1 on first use
    Q: float = 1.0
    c0_offset: float = 1.0
    delta_next: Optional[float] = None

    @property
    def delta_min(self) -> float:
        return 1.0 - self.eta


@dataclass(frozen=True)
class Geometric:
    """nu_{k+1} = (1 - delta)(sigma + rho*lambda_k^2)||d^k||^2 with a fixed delta."""

    nu0: float = 1.0
    delta: float = 0.5
    nu: Optional[float] = None
    delta_next: Optional[float] = None

    @property
    def delta_min(self) -> float:
        return self.delta


@dataclass(frozen=True)
class PowerDecay:
    omega: float = 0.01
    p: float = 1.0
    delta_next: Optional[float] = None


@dataclass(frozen=True)
class LogDecay:
    omega: float = 0.01
    delta_next: Optional[float] = None


@dataclass(frozen=True)
class Grippo:
    """Max over a memory of the last m_k + 1 values, m_k <= min(m_{k-1} + 1, M)."""

    M: int = 5
    m: int = 0
    delta_next: Optional[float] = None


NuState = Union[Zero, Summable, ZhangHager, Geometric, PowerDecay, LogDecay, Grippo]

_REGISTRY: Dict[str, type] = {
    "zero": Zero,
    "summable": Summable,
    "zhang_hager": ZhangHager,
    "geometric": Geometric,
    "power_decay": PowerDecay,
    "log_decay": LogDecay,
    "grippo": Grippo,
}

NU_STRATEGIES = tuple(_REGISTRY)


def _validate(state: NuState) -> NuState:
    if isinstance(state, Summable) and not (state.nu0 > 0 and 0 < state.ratio < 1):
        raise ConfigurationError("summable: need nu0 > 0 and 0 < ratio < 1")
    if isinstance(state, ZhangHager) and not (0 <= state.eta < 1 and state.c0_offset > 0):
        raise ConfigurationError("zhang_hager: need 0 <= eta < 1 and c0_offset > 0")
    if isinstance(state, Geometric) and not (state.nu0 > 0 and 0 < state.delta < 1):
        raise ConfigurationError("geometric: need nu0 > 0 and 0 < delta < 1")
    if isinstance(state, (PowerDecay, LogDecay)) and not state.omega > 0:
        raise ConfigurationError("decay strategies need omega > 0")
    if isinstance(state, PowerDecay) and not state.p > 0:
        raise ConfigurationError("power_decay: need p > 0")
    if isinstance(state, Grippo) and not (int(state.M) == state.M and state.M > 0):
        raise ConfigurationError("grippo: M must be a positive integer")
    return state


def make_nu_strategy(name: str, **params: Any) -> NuState:
    cls = _REGISTRY.get(name)
    if cls is None:
        raise ConfigurationError(f"unknown nu strategy {name!r}, expected one of {NU_STRATEGIES}")
    allowed = {f.name for f in dataclasses.fields(cls)} - {"delta_next", "C", "Q", "nu", "m"}
    unknown = set(params) - allowed
    if unknown:
        raise ConfigurationError(f"nu strategy {name!r} does not take {sorted(unknown)}")
    if cls is Grippo and "M" in params:
        params = {**params, "M": int(params["M"])}
    return _validate(cls(**params))


@dataclass(frozen=True)
class NuSpec:
    """Picklable strategy description; ``make()`` returns a fresh state per run."""

    name: str = "power_decay"
    params: Mapping[str, Any] = field(default_factory=lambda: {"omega": 0.01})

    def make(self) -> NuState:
        return make_nu_strategy(self.name, **dict(self.params))


def can_vanish(state: NuState) -> bool:
    """True when the rule may return nu_k == 0 (illegal for nonsmooth g)."""
    return isinstance(state, (Zero, Grippo))


# ---------- value / update ----------

def nu_value(state: NuState, ctx: NuContext) -> float:
    if isinstance(state, Zero):
        return 0.0
    if isinstance(state, Summable):
        return state.nu0 * state.ratio ** ctx.k
    if isinstance(state, ZhangHager):
        C = ctx.phi_history[0] + state.c0_offset if state.C is None else state.C
        return max(0.0, C - ctx.phi_k)
    if isinstance(state, Geometric):
        return state.nu0 if state.nu is None else state.nu
    if isinstance(state, PowerDecay):
        return state.omega * ctx.d_norm_sq / (ctx.k + 1) ** state.p
    if isinstance(state, LogDecay):
        return state.omega * ctx.d_norm_sq / math.log(ctx.k + 2)
    if isinstance(state, Grippo):
        if not ctx.smooth_g:
            raise ConfigurationError("grippo memory rule needs a differentiable g")
        window = ctx.phi_history[-(state.m + 1):]
        return max(0.0, max(window) - ctx.phi_k)
    raise TypeError(f"not a nu state: {state!r}")


def nu_update(state: NuState, phi_next: float, ctx: NuContext) -> NuState:
    if isinstance(state, ZhangHager):
        C = ctx.phi_history[0] + state.c0_offset if state.C is None else state.C
        q_next = state.eta * state.Q + 1.0
        c_next = (state.eta * state.Q * C + phi_next) / q_next
        return dataclasses.replace(state, C=c_next, Q=q_next, delta_next=1.0 / q_next)
    if isinstance(state, Geometric):
        nu_next = (1.0 - state.delta) * (ctx.sigma + ctx.rho * ctx.lambda_k ** 2) * ctx.d_norm_sq
        return dataclasses.replace(state, nu=nu_next, delta_next=state.delta)
    if isinstance(state, Grippo):
        return dataclasses.replace(state, m=min(state.m + 1, state.M))
    return state


# ---------- threshold indices ----------

def _decay_factor(strategy: Union[PowerDecay, LogDecay], k: int) -> float:
    if isinstance(strategy, PowerDecay):
        return strategy.omega / (k + 1) ** strategy.p
    return strategy.omega / math.log(k + 2)


def s3_threshold_index(strategy: Union[PowerDecay, LogDecay], varsigma: float, sigma: float) -> int:
    """Smallest k0 with nu_k <= varsigma * sigma * ||d^k||^2 for every k >= k0."""
    if not 0 < varsigma < 1:
        raise ConfigurationError(f"varsigma must lie in (0, 1), got {varsigma}")
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be > 0, got {sigma}")
    if not isinstance(strategy, (PowerDecay, LogDecay)):
        raise ConfigurationError(f"no closed-form threshold for {type(strategy).__name__}")
    bound = varsigma * sigma
    ratio = strategy.omega / bound
    if isinstance(strategy, PowerDecay):
        guess = math.ceil(ratio ** (1.0 / strategy.p) - 1.0)
    else:
        guess = math.ceil(math.exp(ratio) - 2.0)
    k0 = max(0, guess)
    # the closed form can be off by one under rounding
    while k0 > 0 and _decay_factor(strategy, k0 - 1) <= bound:
        k0 -= 1
    while _decay_factor(strategy, k0) > bound:
        k0 += 1
    return k0


def s3_prime_index(nus: Sequence[float], d_norms_sq: Sequence[float], delta_bar: float,
                   sigma: float) -> Optional[int]:
    """First k0 after which nu_k <= delta_bar * ||d^k||^2 holds on the whole sequence."""
    if not 0 < delta_bar < sigma:
        raise ConfigurationError(f"delta_bar must lie in (0, sigma={sigma}), got {delta_bar}")
    k0 = 0
    for k, (nu, dd) in enumerate(zip(nus, d_norms_sq)):
        if nu > delta_bar * dd:
            k0 = k + 1
    return k0 if k0 < len(nus) else None
