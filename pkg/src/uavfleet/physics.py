"""Rotary-wing power and energy models.

Closed-form hover/cruise/ascent/descent powers for a multi-rotor airframe, the
altitude round-trip energy of each task-collection maneuver, and per-leg flight
energy. Acceleration transients are ignored; their share of mission time is
negligible at these ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import RotorParams, Task, TaskClass, UavSpec


class PhysicsDomainError(ValueError):
    pass


def distance_u2t(uav_pos, task_pos) -> float:
    """Horizontal distance plus vertical distance (additive, not straight-line)."""
    horiz = math.hypot(task_pos[0] - uav_pos[0], task_pos[1] - uav_pos[1])
    vert = abs(task_pos[2] - uav_pos[2])
    return horiz + vert


def _blade_and_induced(r: RotorParams) -> tuple:
    w32 = r.weight_N ** 1.5
    p_bl = (w32 / math.sqrt(r.n_rotors * r.air_density * r.rotor_disk_area_m2)
            * r.thrust_coeff ** -1.5 * (r.profile_drag_coeff / 8.0) * r.rotor_solidity)
    p_in = (w32 / math.sqrt(2.0 * r.n_rotors * r.air_density * r.rotor_disk_area_m2)
            * (1.0 + r.induced_power_factor))
    return p_bl, p_in


def hover_power(r: RotorParams) -> float:
    """Blade profile power plus induced power at zero airspeed."""
    p_bl, p_in = _blade_and_induced(r)
    return p_bl + p_in


def cruise_power(r: RotorParams, v: float) -> float:
    """Forward-flight power: blade, speed-dependent profile, induced, parasite terms."""
    if v < 0:
        raise PhysicsDomainError("speed must be >= 0")
    v0 = r.hover_induced_velocity_mps
    if v0 <= 0:
        raise PhysicsDomainError("hover induced velocity must be > 0")
    p_bl, p_in = _blade_and_induced(r)
    profile_v2 = (3.0 / 8.0) * r.profile_drag_coeff * math.sqrt(
        r.weight_N * r.n_rotors * r.air_density * r.rotor_disk_area_m2 / r.thrust_coeff
    ) * r.rotor_solidity * v * v
    induced_factor = math.sqrt(
        math.sqrt(1.0 + v ** 4 / (4.0 * v0 ** 4)) - v * v / (2.0 * v0 * v0)
    )
    parasite = (r.n_rotors / 2.0) * r.flat_plate_area_horiz_m2 * r.air_density * v ** 3
    return p_bl + profile_v2 + p_in * induced_factor + parasite


def ascent_power(r: RotorParams, v: float) -> float:
    """Climb power at vertical speed v."""
    if v < 0:
        raise PhysicsDomainError("speed must be >= 0")
    sv = r.flat_plate_area_vert_m2
    a = r.rotor_disk_area_m2
    radicand = (1.0 + sv / a) * v * v + 2.0 * r.weight_N / (r.n_rotors * r.air_density * a)
    return (0.5 * r.weight_N * v
            + (r.n_rotors / 4.0) * sv * r.air_density * v ** 3
            + (0.5 * r.weight_N + (r.n_rotors / 4.0) * sv * r.air_density * v * v)
            * math.sqrt(radicand))


def descent_power(r: RotorParams, v: float) -> float:
    """Descent power at vertical speed v; valid only while the radicand stays >= 0."""
    if v < 0:
        raise PhysicsDomainError("speed must be >= 0")
    sv = r.flat_plate_area_vert_m2
    a = r.rotor_disk_area_m2
    radicand = (1.0 - sv / a) * v * v + 2.0 * r.weight_N / (r.n_rotors * r.air_density * a)
    if radicand < 0:
        raise PhysicsDomainError(f"descent model out of envelope at v={v} m/s (negative radicand)")
    return (0.5 * r.weight_N * v
            - (r.n_rotors / 4.0) * sv * r.air_density * v ** 3
            + (0.5 * r.weight_N - (r.n_rotors / 4.0) * sv * r.air_density * v * v)
            * math.sqrt(radicand))


@dataclass(frozen=True)
class PowerProfile:
    p_hover_W: float
    p_cruise_W: float
    p_cruise_low_W: float
    p_ascent_W: float
    p_descent_W: float
    t_ascend_s: float      # z_min <-> z_max band
    t_descend_s: float
    t_ascend_ground_s: float   # z_max <-> ground, used by edge-video pickups
    t_descend_ground_s: float


def power_profile(uav: UavSpec) -> PowerProfile:
    """Precompute every power level and altitude-transit time for one airframe."""
    r = uav.rotor
    band = abs(uav.z_max_m - uav.z_min_m)
    return PowerProfile(
        p_hover_W=hover_power(r),
        p_cruise_W=cruise_power(r, uav.cruise_speed_mps),
        p_cruise_low_W=cruise_power(r, uav.cruise_low_speed_mps),
        p_ascent_W=ascent_power(r, uav.ascend_speed_mps),
        p_descent_W=descent_power(r, uav.descend_speed_mps),
        t_ascend_s=band / uav.ascend_speed_mps,
        t_descend_s=band / uav.descend_speed_mps,
        t_ascend_ground_s=uav.z_max_m / uav.ascend_speed_mps,
        t_descend_ground_s=uav.z_max_m / uav.descend_speed_mps,
    )


def task_collect_time(task: Task, profile: PowerProfile, link_rate_bps: float | None = None) -> float:
    """Seconds spent in the collection maneuver (descent + dwell/transfer + ascent)."""
    cls = task.task_class
    if cls == TaskClass.EDGE_VIDEO:
        if not link_rate_bps or link_rate_bps <= 0:
            raise PhysicsDomainError("edge-video collection requires a positive link rate")
        transfer = task.data_size_bytes * 8.0 / link_rate_bps
        return profile.t_descend_ground_s + transfer + profile.t_ascend_ground_s
    return profile.t_descend_s + task.dwell_time_s + profile.t_ascend_s


def task_energy(task: Task, uav: UavSpec, profile: PowerProfile,
                link_rate_bps: float | None = None) -> float:
    """Energy of the collection maneuver for one task, by class.

    Class 1 loiters at low cruise speed for the recording; class 2 descends to
    the ground and hovers for the transfer (payload bytes converted to bits for
    the Shannon-rate division); class 3 keeps cruise speed through a dip.
    """
    cls = task.task_class
    if cls == TaskClass.UAV_VIDEO:
        return (profile.p_descent_W * profile.t_descend_s
                + profile.p_cruise_low_W * task.dwell_time_s
                + profile.p_ascent_W * profile.t_ascend_s)
    if cls == TaskClass.EDGE_VIDEO:
        if not link_rate_bps or link_rate_bps <= 0:
            raise PhysicsDomainError("edge-video collection requires a positive link rate")
        hover_t = task.data_size_bytes * 8.0 / link_rate_bps
        return (profile.p_descent_W * profile.t_descend_ground_s
                + profile.p_hover_W * hover_t
                + profile.p_ascent_W * profile.t_ascend_ground_s)
    return (profile.p_descent_W * profile.t_descend_s
            + profile.p_cruise_W * task.dwell_time_s
            + profile.p_ascent_W * profile.t_ascend_s)


def leg_flight_energy(from_pos, to_pos, uav: UavSpec, profile: PowerProfile) -> float:
    """Energy to fly one leg: horizontal at cruise power, vertical at ascent/descent power."""
    horiz = math.hypot(to_pos[0] - from_pos[0], to_pos[1] - from_pos[1])
    energy = horiz / uav.cruise_speed_mps * profile.p_cruise_W
    dz = to_pos[2] - from_pos[2]
    if dz > 0:
        energy += profile.p_ascent_W * (dz / uav.ascend_speed_mps)
    elif dz < 0:
        energy += profile.p_descent_W * (-dz / uav.descend_speed_mps)
    return energy


def leg_flight_time(from_pos, to_pos, uav: UavSpec) -> float:
    horiz = math.hypot(to_pos[0] - from_pos[0], to_pos[1] - from_pos[1])
    t = horiz / uav.cruise_speed_mps
    dz = to_pos[2] - from_pos[2]
    if dz > 0:
        t += dz / uav.ascend_speed_mps
    elif dz < 0:
        t += -dz / uav.descend_speed_mps
    return t
