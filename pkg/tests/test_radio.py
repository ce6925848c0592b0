import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import rate_mp
from rbaccess.errors import ConfigurationError, UsageError
from rbaccess.radio import (
    NO_ACCESS,
    ChannelGains,
    RbRadioParams,
    RewardParams,
    SlotClock,
    busy_rate,
    dbm_to_watts,
    discounted_total,
    expected_rates,
    rb_rate,
    slot_reward,
    thermal_noise_watts,
)

BUSY_EXAMPLE = 1865771.608282926  # mpmath, 50 digits: 2e6 * log2(1 + 0.1 / 0.11)


def gains(*rows):
    return ChannelGains(np.array(rows, dtype=float))


def test_idle_rate_unit_snr():
    params = RbRadioParams(2e6, 1.0, 1.0)
    assert rb_rate(0, 0, 0, gains([1.0]), params) == pytest.approx(2e6, rel=1e-15)


def test_zero_power_gives_zero_rate():
    params = RbRadioParams(2e6, 0.0, 1e-3)
    assert rb_rate(0, 0, 0, gains([3.7]), params) == 0.0


def test_busy_rate_matches_high_precision_oracle():
    params = RbRadioParams(2e6, 0.1, 0.01)
    assert rate_mp(2e6, 0.1, 1.0, 0.01, [1.0]) == pytest.approx(BUSY_EXAMPLE, rel=1e-15)
    got = rb_rate(0, 0, 1, gains([1.0], [1.0]), params, interferers=[1])
    assert got == pytest.approx(BUSY_EXAMPLE, rel=1e-12)


@pytest.mark.parametrize("n,r", [(2, 0), (0, 3), (-1, 0)])
def test_index_out_of_range(n, r):
    with pytest.raises(UsageError):
        rb_rate(n, r, 0, gains([1.0, 1.0], [1.0, 1.0]), RbRadioParams(1e6, 0.1, 1e-3))


def test_interferer_preconditions():
    g = gains([1.0], [1.0])
    p = RbRadioParams(1e6, 0.1, 1e-3)
    with pytest.raises(UsageError):
        rb_rate(0, 0, 0, g, p, interferers=[1])
    with pytest.raises(UsageError):
        rb_rate(0, 0, 1, g, p, interferers=[])
    with pytest.raises(UsageError):
        rb_rate(0, 0, 1, g, p, interferers=[0])


def test_nonpositive_noise_rejected():
    with pytest.raises(ConfigurationError):
        RbRadioParams(1e6, 0.1, 0.0)
    with pytest.raises(ConfigurationError):
        ChannelGains(np.array([[-1.0]]))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(1e-3, 1.0))
def test_rate_monotone_in_gains(own, delta, other, noise):
    p = RbRadioParams(1e6, 0.2, noise)
    lo = busy_rate(own, other, p)
    assert busy_rate(own + delta, other, p) >= lo
    assert busy_rate(own, other + delta, p) <= lo
    idle = rb_rate(0, 0, 0, gains([own]), p)
    assert idle >= lo
    assert np.isfinite(lo) and lo >= 0


def test_slot_reward():
    assert slot_reward(NO_ACCESS, [1.0, 3.0, 2.0]) == 0.0
    assert slot_reward(2, [1.0, 3.0, 2.0]) == 3.0
    assert slot_reward(1, [BUSY_EXAMPLE]) == pytest.approx(BUSY_EXAMPLE)
    with pytest.raises(UsageError):
        slot_reward(4, [1.0, 3.0, 2.0])


@given(st.lists(st.floats(0, 1e9), min_size=1, max_size=8))
def test_no_access_always_zero(rates):
    assert slot_reward(NO_ACCESS, rates) == 0.0


def test_discounted_total_examples():
    assert discounted_total([5], 0.5) == 5
    assert discounted_total([1, 1, 1], 1.0) == 3
    assert discounted_total([2, 4], 0.5) == 5.0
    with pytest.raises(ConfigurationError):
        discounted_total([1.0], 1.5)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=10))
def test_zero_discount_keeps_last_slot(rewards):
    assert discounted_total(rewards, 0.0) == rewards[-1]


def test_clock_and_reward_params():
    c = SlotClock(3)
    assert c.remaining == 3 and c.advance().current_slot == 1
    with pytest.raises(UsageError):
        SlotClock(2, 2)
    with pytest.raises(ConfigurationError):
        SlotClock(0)
    with pytest.raises(ConfigurationError):
        RewardParams(-0.1)


def test_link_budget_helpers():
    assert dbm_to_watts(20.0) == pytest.approx(0.1)
    assert thermal_noise_watts(2e6) == pytest.approx(10 ** ((-174 + 10 * math.log10(2e6)) / 10) / 1000)


def test_expected_rates_against_quadrature():
    from scipy import integrate, stats

    p = RbRadioParams(1e6, 1.0, 1.0)
    idle, busy = expected_rates(p, 1, 200_000, 7)
    # power gain = g**2 with g standard normal; integrate over g >= 0 (twice the half-line)
    phi = stats.norm.pdf
    want_idle = 2 * integrate.quad(lambda g: 1e6 * math.log2(1 + g * g) * phi(g), 0, 10)[0]
    assert idle == pytest.approx(want_idle, rel=5e-3)
    want_busy = 4 * integrate.dblquad(lambda x, g: 1e6 * math.log2(1 + g * g / (x * x + 1)) * phi(g) * phi(x),
                                      0, 9, 0, 9, epsrel=1e-6)[0]
    assert busy == pytest.approx(want_busy, rel=1e-2)
    assert expected_rates(p, 1, 200_000, 7) == (idle, busy)
