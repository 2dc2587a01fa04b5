import math

import pytest
from hypothesis import given, settings, strategies as st

from uavfleet import channel
from uavfleet.scenario import ChannelParams, UavSpec

P = ChannelParams()
UAV = UavSpec(home_station=0)


# frozen oracle values (independent calculator evaluation)
@pytest.mark.parametrize("d,expected", [
    (100.0, 70281061.69663432),
    (200.0, 281124246.7865373),
    (1118.033988749895, 8785132712.079292),
])
def test_path_loss_oracle(d, expected):
    assert channel.path_loss_u2g(d, P) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("theta,expected", [
    (15.0, 0.19775197519401724),
    (45.0, 0.9676918999472423),
    (80.0, 0.9998765555411663),
])
def test_p_los_oracle(theta, expected):
    assert channel.p_los(theta, P) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("uav_pos,gain,rate", [
    ((100.0, 100.0, 100.0), 4.223700340622633e-09, 176881547.8911577),
    ((50.0, 0.0, 60.0), 2.3058074638986754e-08, 201368418.7292726),
    ((300.0, 400.0, 100.0), 1.6206167473945186e-10, 129844333.65796567),
])
def test_u2g_gain_and_rate_oracle(uav_pos, gain, rate):
    node = (0.0, 0.0, 0.0)
    assert channel.channel_gain_u2g(uav_pos, node, P) == pytest.approx(gain, rel=1e-6)
    assert channel.rate_u2g(UAV, uav_pos, node, P) == pytest.approx(rate, rel=1e-6)


def test_u2u_rate_oracle():
    r = channel.rate_u2u(UAV, (0.0, 0.0, 100.0), (500.0, 0.0, 100.0), P)
    assert r == pytest.approx(591862207.4047533, rel=1e-6)


def test_elevation_angle():
    assert channel.elevation_angle_deg((0, 0, 100), (0, 0, 0)) == pytest.approx(90.0)
    assert channel.elevation_angle_deg((100, 0, 100), (0, 0, 0)) == pytest.approx(45.0)


def test_p_los_monotone_in_elevation():
    thetas = [i * 0.9 for i in range(101)]
    vals = [channel.p_los(t, P) for t in thetas]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_domain_errors():
    with pytest.raises(channel.ChannelDomainError):
        channel.path_loss_u2g(0.0, P)
    with pytest.raises(channel.ChannelDomainError):
        channel.rate_u2g(UAV, (0, 0, 0), (0, 0, 0), P)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(1.0, 1500.0), z=st.floats(50.0, 100.0))
def test_rate_positive_and_loss_grows(x, z):
    node = (0.0, 0.0, 0.0)
    pos = (x, 0.0, z)
    assert channel.rate_u2g(UAV, pos, node, P) > 0
    d = math.sqrt(x * x + z * z)
    assert channel.path_loss_u2g(2 * d, P) == pytest.approx(
        4 * channel.path_loss_u2g(d, P), rel=1e-12)


def test_rate_decreases_with_horizontal_distance_at_fixed_altitude():
    node = (0.0, 0.0, 0.0)
    rates = [channel.rate_u2g(UAV, (x, 0.0, 100.0), node, P)
             for x in (10.0, 100.0, 500.0, 1500.0)]
    assert all(b < a for a, b in zip(rates, rates[1:]))
