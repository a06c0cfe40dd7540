import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dcboost.dc_core import ConfigurationError
from dcboost.nu_strategies import (
    NU_STRATEGIES,
    Geometric,
    Grippo,
    LogDecay,
    NuContext,
    NuSpec,
    PowerDecay,
    Summable,
    Zero,
    ZhangHager,
    can_vanish,
    make_nu_strategy,
    nu_update,
    nu_value,
    s3_prime_index,
    s3_threshold_index,
)


def ctx(k=0, d=(0.5, -1.0), history=(0.0,), sigma=1.0, rho=0.5, lam=0.0, smooth=True):
    return NuContext(
        k=k, d_k=np.array(d, dtype=float), lambda_prev=1.0, rho=rho, zeta=0.5, sigma=sigma,
        phi_history=list(history), lambda_k=lam, smooth_g=smooth,
    )


def test_simple_values():
    assert nu_value(Zero(), ctx()) == 0.0
    assert nu_value(PowerDecay(omega=0.01), ctx()) == pytest.approx(0.0125)
    assert nu_value(PowerDecay(omega=0.01, p=2.0), ctx(k=1)) == pytest.approx(0.0125 / 4.0)
    assert nu_value(LogDecay(omega=0.01), ctx(k=3)) == pytest.approx(0.0125 / math.log(5.0))
    s = Summable(nu0=2.0, ratio=0.25)
    assert nu_value(s, ctx(k=2)) == pytest.approx(0.125)
    assert s.budget == pytest.approx(8.0 / 3.0)


def test_zhang_hager_averaging():
    state = ZhangHager(eta=0.5, C=3.0, Q=1.0)
    nxt = nu_update(state, 1.0, ctx(history=[2.0]))
    assert nxt.Q == pytest.approx(1.5)
    assert nxt.C == pytest.approx(5.0 / 3.0)
    assert nxt.delta_next == pytest.approx(2.0 / 3.0)
    assert nu_value(nxt, ctx(history=[2.0, 1.0])) == pytest.approx(2.0 / 3.0)
    assert nxt.delta_min == pytest.approx(0.5)


def test_zhang_hager_first_reference_value():
    state = ZhangHager(c0_offset=0.25)
    assert nu_value(state, ctx(history=[4.0])) == pytest.approx(0.25)


def test_geometric_schedule():
    state = Geometric(nu0=0.7, delta=0.5)
    assert nu_value(state, ctx()) == pytest.approx(0.7)
    nxt = nu_update(state, 0.0, ctx(d=(1.0, 1.0), sigma=1.0, rho=0.5, lam=1.0))
    assert nxt.nu == pytest.approx(1.5)
    assert nxt.delta_next == 0.5
    assert nu_value(nxt, ctx()) == pytest.approx(1.5)


def test_grippo_memory():
    state = Grippo(M=2, m=2)
    assert nu_value(state, ctx(history=[5.0, 6.0, 4.0])) == pytest.approx(2.0)
    assert nu_value(Grippo(M=2, m=0), ctx(history=[5.0, 6.0, 4.0])) == 0.0
    assert nu_update(state, 3.0, ctx()).m == 2
    assert nu_update(Grippo(M=2, m=0), 3.0, ctx()).m == 1
    with pytest.raises(ConfigurationError):
        nu_value(state, ctx(smooth=False))


def test_decay_rules_keep_state():
    for state in (Zero(), PowerDecay(), LogDecay(), Summable()):
        assert nu_update(state, 0.0, ctx()) is state
        assert state.delta_next is None


def test_factory():
    assert set(NU_STRATEGIES) == {"zero", "summable", "zhang_hager", "geometric", "power_decay", "log_decay", "grippo"}
    assert make_nu_strategy("power_decay", omega=0.2, p=2) == PowerDecay(omega=0.2, p=2)
    assert make_nu_strategy("grippo", M=3.0) == Grippo(M=3)
    assert NuSpec().make() == PowerDecay(omega=0.01)
    with pytest.raises(ConfigurationError):
        make_nu_strategy("armijo")
    with pytest.raises(ConfigurationError):
        make_nu_strategy("power_decay", eta=0.5)
    with pytest.raises(ConfigurationError):
        make_nu_strategy("zhang_hager", eta=1.0)
    with pytest.raises(ConfigurationError):
        make_nu_strategy("geometric", delta=0.0)
    with pytest.raises(ConfigurationError):
        make_nu_strategy("log_decay", omega=-1.0)
    # internal state is not configurable
    with pytest.raises(ConfigurationError):
        make_nu_strategy("zhang_hager", C=1.0)


def test_vanishing_rules():
    assert can_vanish(Zero())
    assert can_vanish(Grippo())
    for name in ("summable", "zhang_hager", "geometric", "power_decay", "log_decay"):
        assert not can_vanish(make_nu_strategy(name))


def test_threshold_index_closed_form():
    assert s3_threshold_index(PowerDecay(omega=10.0), 0.5, 1.0) == 19
    assert s3_threshold_index(PowerDecay(omega=0.01), 0.5, 1.0) == 0
    # 1 / ln(k + 2) <= 1/2 first at k = ceil(e^2 - 2)
    assert s3_threshold_index(LogDecay(omega=1.0), 0.5, 1.0) == 6 == math.ceil(math.e ** 2 - 2)
    with pytest.raises(ConfigurationError):
        s3_threshold_index(PowerDecay(), 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        s3_threshold_index(PowerDecay(), 0.5, 0.0)
    with pytest.raises(ConfigurationError):
        s3_threshold_index(Summable(), 0.5, 1.0)


def _brute_force(factor, bound):
    k = 0
    while factor(k) > bound:
        k += 1
    return k


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.2, 0.9), st.floats(1.0, 5.0), st.sampled_from([1.0, 2.0]))
def test_power_threshold_matches_scan(omega, varsigma, sigma, p):
    expected = _brute_force(lambda k: omega / (k + 1) ** p, varsigma * sigma)
    assert s3_threshold_index(PowerDecay(omega=omega, p=p), varsigma, sigma) == expected


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.2, 0.9), st.floats(1.0, 5.0))
def test_log_threshold_matches_scan(omega, varsigma, sigma):
    expected = _brute_force(lambda k: omega / math.log(k + 2), varsigma * sigma)
    assert s3_threshold_index(LogDecay(omega=omega), varsigma, sigma) == expected


def test_prime_index():
    assert s3_prime_index([1.0, 0.1, 0.01], [1.0, 1.0, 1.0], 0.2, 1.0) == 1
    assert s3_prime_index([0.0, 0.0], [1.0, 1.0], 0.2, 1.0) == 0
    assert s3_prime_index([1.0, 1.0], [1.0, 1.0], 0.2, 1.0) is None
    with pytest.raises(ConfigurationError):
        s3_prime_index([0.0], [1.0], 1.0, 1.0)
