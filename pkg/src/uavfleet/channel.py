"""Air-to-ground and air-to-air link model.

U2G links combine free-space path loss with an elevation-angle LoS probability;
U2U links are pure free-space. All functions are pure and safe to call
concurrently.
"""

from __future__ import annotations

import math

from .scenario import ChannelParams, UavSpec


class ChannelDomainError(ValueError):
    pass


def path_loss_u2g(distance_m: float, params: ChannelParams) -> float:
    """Free-space path loss (4 pi f_c d / c)^2."""
    if distance_m <= 0:
        raise ChannelDomainError(f"distance must be > 0, got {distance_m}")
    x = 4.0 * math.pi * params.carrier_hz * distance_m / params.light_speed_mps
    return x * x


def p_los(elevation_deg: float, params: ChannelParams) -> float:
    """LoS probability 1 / (1 + a exp(-b (theta - a))), theta in degrees."""
    a, b = params.los_a, params.los_b
    return 1.0 / (1.0 + a * math.exp(-b * (elevation_deg - a)))


def elevation_angle_deg(uav_pos, node_pos) -> float:
    """Elevation of the UAV as seen from the ground node, in degrees."""
    dx = uav_pos[0] - node_pos[0]
    dy = uav_pos[1] - node_pos[1]
    dz = abs(uav_pos[2] - node_pos[2])
    horiz = math.hypot(dx, dy)
    return math.degrees(math.atan2(dz, horiz))


def channel_gain_u2g(uav_pos, node_pos, params: ChannelParams) -> float:
    """LoS/NLoS-mixed gain divided by free-space path loss."""
    d = _distance(uav_pos, node_pos)
    if d <= 0:
        raise ChannelDomainError("coincident positions")
    loss = path_loss_u2g(d, params)
    pl = p_los(elevation_angle_deg(uav_pos, node_pos), params)
    return (pl * params.gain_los + (1.0 - pl) * params.gain_nlos) / loss


def rate_u2g(uav: UavSpec, uav_pos, node_pos, params: ChannelParams) -> float:
    """Shannon rate of the UAV-to-ground link in bits/s."""
    h = channel_gain_u2g(uav_pos, node_pos, params)
    b = params.bandwidth_u2g_hz
    snr = uav.transmit_power_W * h / (params.noise_psd_u2g * b)
    return b * math.log2(1.0 + snr)


def rate_u2u(uav_i: UavSpec, pos_i, pos_j, params: ChannelParams) -> float:
    """Shannon rate of the UAV-to-UAV free-space link in bits/s.

    Antenna gains default to 1; the optional multipliers cover hardware with
    directional antennas.
    """
    d = _distance(pos_i, pos_j)
    if d <= 0:
        raise ChannelDomainError("coincident positions")
    h = params.antenna_gain_tx * params.antenna_gain_rx / path_loss_u2g(d, params)
    b = params.bandwidth_u2u_hz
    snr = uav_i.transmit_power_W * h / (params.noise_psd_u2u * b)
    return b * math.log2(1.0 + snr)


def _distance(p, q) -> float:
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2)
