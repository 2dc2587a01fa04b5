"""World description: region, stations, UAV fleet, tasks, and all tunable constants.

Everything downstream (channel, physics, routing, environment) reads from the
immutable Scenario produced here. Generation is fully deterministic per
(config, seed) pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import IntEnum
from typing import Any

import numpy as np


class ConfigError(ValueError):
    """Raised when a scenario config fails validation; message names the field."""


class TaskClass(IntEnum):
    UAV_VIDEO = 1
    EDGE_VIDEO = 2
    SENSOR_DATA = 3


class TaskStatus(IntEnum):
    UNASSIGNED = 0
    ASSIGNED = 1
    COLLECTED = 2
    PARTIALLY_PROCESSED = 3
    COMPLETED = 4


MB = 1_000_000


@dataclass(frozen=True)
class TaskValueParams:
    k_m: float = 1.0
    r_m: float = 0.5
    tau_exp: float = 1.0

    def __post_init__(self):
        if self.k_m < 0:
            raise ConfigError("k_m must be >= 0")
        if self.r_m < 0:
            raise ConfigError("r_m must be >= 0")


@dataclass
class Task:
    id: int
    position: tuple  # (x, y, z) metres
    task_class: TaskClass
    priority: int
    data_size_bytes: float
    dwell_time_s: float
    value_params: TaskValueParams
    status: TaskStatus = TaskStatus.UNASSIGNED
    assigned_to: int | None = None
    processed_fraction: float = 0.0
    collected_by: int | None = None


@dataclass(frozen=True)
class RegionSpec:
    side_length_m: float = 1500.0
    station_positions: tuple = ((0.0, 0.0), (1500.0, 0.0), (1500.0, 1500.0), (0.0, 1500.0))
    grid_resolution_m: float = 50.0

    def __post_init__(self):
        if self.side_length_m <= 0:
            raise ConfigError("side_length_m must be > 0")
        if self.grid_resolution_m <= 0:
            raise ConfigError("grid_resolution_m must be > 0")
        n_cells = self.side_length_m / self.grid_resolution_m
        if abs(n_cells - round(n_cells)) > 1e-9:
            raise ConfigError("grid_resolution_m must divide side_length_m")
        a = self.side_length_m
        for sx, sy in self.station_positions:
            inside = 0.0 < sx < a and 0.0 < sy < a
            if inside:
                raise ConfigError("station_positions must lie on or outside the region border")


@dataclass(frozen=True)
class RotorParams:
    weight_N: float = 20.0
    n_rotors: int = 4
    air_density: float = 1.225
    rotor_disk_area_m2: float = 0.05
    thrust_coeff: float = 0.1
    profile_drag_coeff: float = 0.01
    rotor_solidity: float = 0.05
    induced_power_factor: float = 0.1
    hover_induced_velocity_mps: float = 6.39
    flat_plate_area_horiz_m2: float = 0.01
    flat_plate_area_vert_m2: float = 0.01

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v <= 0:
                raise ConfigError(f"rotor.{name} must be > 0")


@dataclass(frozen=True)
class UavSpec:
    home_station: int
    battery_flight_J: float = 2.0e5
    battery_process_J: float = 2.0e4
    storage_bytes: float = 1.0e9
    n_cores: int = 4
    cpu_hz: float = 1.8e9
    flops_per_cycle: int = 4
    transmit_power_W: float = 5.0
    cruise_speed_mps: float = 15.0
    cruise_low_speed_mps: float = 5.0
    ascend_speed_mps: float = 2.0
    descend_speed_mps: float = 2.0
    z_min_m: float = 50.0
    z_max_m: float = 100.0
    rotor: RotorParams = field(default_factory=RotorParams)

    def __post_init__(self):
        positive = [
            "battery_flight_J", "battery_process_J", "storage_bytes", "n_cores",
            "cpu_hz", "flops_per_cycle", "transmit_power_W", "cruise_speed_mps",
            "cruise_low_speed_mps", "ascend_speed_mps", "descend_speed_mps",
            "z_min_m", "z_max_m",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"uav.{name} must be > 0")
        if self.z_min_m >= self.z_max_m:
            raise ConfigError("uav.z_min_m must be < z_max_m")
        if self.cruise_low_speed_mps >= self.cruise_speed_mps:
            raise ConfigError("uav.cruise_low_speed_mps must be < cruise_speed_mps")


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_u2g_hz: float = 10e6
    bandwidth_u2u_hz: float = 40e6
    # -100 dBm total noise power spread over the respective band
    noise_psd_u2g: float = 1e-13 / 10e6
    noise_psd_u2u: float = 1e-13 / 40e6
    carrier_hz: float = 2e9
    light_speed_mps: float = 299_792_458.0
    los_a: float = 9.61
    los_b: float = 0.16
    gain_los: float = 1.0
    gain_nlos: float = 0.2
    antenna_gain_tx: float = 1.0
    antenna_gain_rx: float = 1.0

    def __post_init__(self):
        if self.bandwidth_u2g_hz <= 0 or self.bandwidth_u2u_hz <= 0:
            raise ConfigError("channel bandwidths must be > 0")
        if self.noise_psd_u2g <= 0 or self.noise_psd_u2u <= 0:
            raise ConfigError("channel noise PSDs must be > 0")
        if not (0 < self.gain_nlos <= self.gain_los):
            raise ConfigError("channel gains must satisfy 0 < gain_nlos <= gain_los")


@dataclass(frozen=True)
class LearnParams:
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    tau_soft: float = 0.005
    gamma: float = 0.99
    batch_size: int = 64
    entropy_alpha: float = 0.2
    replay_capacity: int = 20_000
    t0_sync: int = 10
    d_threshold_m: float = 200.0
    lambda_decay: float = 0.05
    reward_mu: float = 1.0
    reward_omega: float = 1.0
    reward_epsilon: float = 1e-5
    reward_phi: float = 1.0
    alpha_weight: float = 1.0
    beta_weight: float = 1.0
    move_energy_scale: float = 0.002  # value units per metre in the routing objective
    process_energy_per_byte: float = 1e-5
    # episode bookkeeping (no home in the power/reward models)
    horizon_steps: int = 40
    mission_time_s: float = 1800.0
    candidate_k: int = 4
    shared_global_reward: bool = False

    def __post_init__(self):
        if not (0 < self.tau_soft <= 1):
            raise ConfigError("learn.tau_soft must be in (0, 1]")
        if not (0 <= self.gamma < 1):
            raise ConfigError("learn.gamma must be in [0, 1)")
        if self.t0_sync < 1:
            raise ConfigError("learn.t0_sync must be >= 1")
        if self.lambda_decay < 0:
            raise ConfigError("learn.lambda_decay must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("learn.batch_size must be >= 1")
        if self.candidate_k < 1:
            raise ConfigError("learn.candidate_k must be >= 1")


@dataclass(frozen=True)
class ComputeParams:
    gamma_per_class: tuple = ((1, 2.6e5), (2, 2.6e5), (3, 1e3))  # FLOPs per byte
    overhead_s: float = 0.1

    def __post_init__(self):
        for cls, g in self.gamma_per_class:
            if g <= 0:
                raise ConfigError(f"compute.gamma_per_class[{cls}] must be > 0")
        if self.overhead_s < 0:
            raise ConfigError("compute.overhead_s must be >= 0")

    def gamma(self, task_class) -> float:
        for cls, g in self.gamma_per_class:
            if cls == int(task_class):
                return g
        raise ConfigError(f"no FLOPs/byte factor configured for class {task_class}")


# priorities must be strictly decreasing from class 1 to class 3
DEFAULT_PRIORITIES = {TaskClass.UAV_VIDEO: 3, TaskClass.EDGE_VIDEO: 2, TaskClass.SENSOR_DATA: 1}

DEFAULT_SIZE_RANGES_MB = {TaskClass.UAV_VIDEO: (100, 200),
                          TaskClass.EDGE_VIDEO: (300, 500),
                          TaskClass.SENSOR_DATA: (1, 10)}

DEFAULT_DWELL_RANGES_S = {TaskClass.UAV_VIDEO: (60.0, 120.0),
                          TaskClass.EDGE_VIDEO: (0.0, 0.0),  # class 2 dwell set by link rate
                          TaskClass.SENSOR_DATA: (5.0, 5.0)}


@dataclass(frozen=True)
class ScenarioConfig:
    n_tasks: int = 110
    n_uavs: int = 16
    n_stations: int = 4
    side_length_m: float = 1500.0
    grid_resolution_m: float = 50.0
    class_proportions: tuple = (0.4, 0.3, 0.3)
    size_ranges_mb: tuple = ((1, 100, 200), (2, 300, 500), (3, 1, 10))
    dwell_ranges_s: tuple = ((1, 60.0, 120.0), (2, 0.0, 0.0), (3, 5.0, 5.0))
    priorities: tuple = ((1, 3), (2, 2), (3, 1))
    value_r_m: float = 0.5
    value_tau: float = 1.0
    n_density_clusters: int = 2
    cluster_fraction: float = 0.5
    cluster_sigma_m: float = 150.0
    uav: UavSpec = field(default_factory=lambda: UavSpec(home_station=0))
    channel: ChannelParams = field(default_factory=ChannelParams)
    learn: LearnParams = field(default_factory=LearnParams)
    compute: ComputeParams = field(default_factory=ComputeParams)

    def __post_init__(self):
        if self.n_tasks < 0:
            raise ConfigError("n_tasks must be >= 0")
        if self.n_uavs < 1:
            raise ConfigError("n_uavs must be >= 1")
        if not (1 <= self.n_stations <= 4):
            raise ConfigError("n_stations must be between 1 and 4")
        if self.side_length_m <= 0:
            raise ConfigError("side_length_m must be > 0")
        if abs(sum(self.class_proportions) - 1.0) > 1e-9:
            raise ConfigError("class_proportions must sum to 1")
        if any(p < 0 for p in self.class_proportions):
            raise ConfigError("class_proportions must be >= 0")
        for cls, lo, hi in self.size_ranges_mb:
            if not (0 < lo <= hi):
                raise ConfigError(f"size_ranges_mb[{cls}] must satisfy 0 < lo <= hi")
        prios = dict(self.priorities)
        if not (prios[1] > prios[2] > prios[3]):
            raise ConfigError("priorities must be strictly decreasing from class 1 to 3")
        if not (0 <= self.cluster_fraction <= 1):
            raise ConfigError("cluster_fraction must be in [0, 1]")
        if self.n_density_clusters < 0:
            raise ConfigError("n_density_clusters must be >= 0")


@dataclass
class Scenario:
    region: RegionSpec
    uavs: list
    tasks: list
    channel: ChannelParams
    learn: LearnParams
    compute: ComputeParams
    seed: int

    @property
    def n_stations(self) -> int:
        return len(self.region.station_positions)

    def station_uavs(self, station: int) -> list:
        return [i for i, u in enumerate(self.uavs) if u.home_station == station]


# region corners in deterministic order; n_stations selects a prefix spread
# over opposite corners first so 2-station scenarios are not adjacent
_CORNER_ORDER = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]


def station_corners(side_length_m: float, n_stations: int) -> tuple:
    return tuple((cx * side_length_m, cy * side_length_m) for cx, cy in _CORNER_ORDER[:n_stations])


def task_value(task: Task) -> float:
    """Intrinsic value k_m * (1 + r_m^tau); assignment indicators are the caller's job."""
    p = task.value_params
    return p.k_m * (1.0 + p.r_m ** p.tau_exp)


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Build a Scenario deterministically from (config, seed)."""
    rng = np.random.default_rng(seed)
    a = config.side_length_m
    region = RegionSpec(
        side_length_m=a,
        station_positions=station_corners(a, config.n_stations),
        grid_resolution_m=config.grid_resolution_m,
    )

    uavs = [
        UavSpec(**{**asdict_shallow(config.uav), "home_station": i % config.n_stations})
        for i in range(config.n_uavs)
    ]

    size_ranges = {cls: (lo, hi) for cls, lo, hi in config.size_ranges_mb}
    dwell_ranges = {cls: (lo, hi) for cls, lo, hi in config.dwell_ranges_s}
    priorities = dict(config.priorities)

    # cluster centres for the non-uniform density component
    centres = rng.uniform(0.1 * a, 0.9 * a, size=(config.n_density_clusters, 2))

    tasks = []
    for m in range(config.n_tasks):
        cls = TaskClass(int(rng.choice([1, 2, 3], p=list(config.class_proportions))))
        if config.n_density_clusters > 0 and rng.random() < config.cluster_fraction:
            c = centres[int(rng.integers(config.n_density_clusters))]
            xy = rng.normal(c, config.cluster_sigma_m)
            xy = np.clip(xy, 0.0, a)
        else:
            xy = rng.uniform(0.0, a, size=2)
        z = 0.0 if cls != TaskClass.UAV_VIDEO else float(config.uav.z_min_m)
        lo, hi = size_ranges[int(cls)]
        size = float(rng.uniform(lo, hi)) * MB
        dlo, dhi = dwell_ranges[int(cls)]
        dwell = float(rng.uniform(dlo, dhi)) if dhi > dlo else float(dlo)
        prio = priorities[int(cls)]
        tasks.append(Task(
            id=m,
            position=(float(xy[0]), float(xy[1]), z),
            task_class=cls,
            priority=prio,
            data_size_bytes=size,
            dwell_time_s=dwell,
            value_params=TaskValueParams(k_m=float(prio), r_m=config.value_r_m,
                                         tau_exp=config.value_tau),
        ))

    return Scenario(region=region, uavs=uavs, tasks=tasks, channel=config.channel,
                    learn=config.learn, compute=config.compute, seed=seed)


def asdict_shallow(dc) -> dict:
    d = asdict(dc)
    if "rotor" in d:
        d["rotor"] = RotorParams(**d["rotor"])
    return d


# ---------------------------------------------------------------------------
# config file ingestion (strict JSON)

_NESTED_TYPES = {"uav": UavSpec, "channel": ChannelParams, "learn": LearnParams,
                 "compute": ComputeParams, "rotor": RotorParams}


def _build_strict(cls, data: dict, path: str):
    fields = {f for f in cls.__dataclass_fields__}
    kwargs: dict[str, Any] = {}
    for key, val in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key '{path}{key}'")
        if key in _NESTED_TYPES and isinstance(val, dict):
            val = _build_strict(_NESTED_TYPES[key], val, f"{path}{key}.")
        elif isinstance(val, list):
            val = _tuplify(val)
        kwargs[key] = val
    return cls(**kwargs)


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def load_config(path) -> ScenarioConfig:
    """Read a strict JSON scenario config; unknown keys are rejected by name."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse failure in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return _build_strict(ScenarioConfig, data, "")


# ---------------------------------------------------------------------------
# scenario (de)serialization for replay

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "region": asdict(s.region),
        "uavs": [asdict(u) for u in s.uavs],
        "tasks": [_task_to_dict(t) for t in s.tasks],
        "channel": asdict(s.channel),
        "learn": asdict(s.learn),
        "compute": asdict(s.compute),
        "seed": s.seed,
    }


def _task_to_dict(t: Task) -> dict:
    d = asdict(t)
    d["task_class"] = int(t.task_class)
    d["status"] = int(t.status)
    return d


def scenario_from_dict(d: dict) -> Scenario:
    region = RegionSpec(**{**d["region"], "station_positions": _tuplify(d["region"]["station_positions"])})
    uavs = [UavSpec(**{**u, "rotor": RotorParams(**u["rotor"])}) for u in d["uavs"]]
    tasks = []
    for td in d["tasks"]:
        td = dict(td)
        td["task_class"] = TaskClass(td["task_class"])
        td["status"] = TaskStatus(td["status"])
        td["position"] = tuple(td["position"])
        td["value_params"] = TaskValueParams(**td["value_params"])
        tasks.append(Task(**td))
    return Scenario(
        region=region, uavs=uavs, tasks=tasks,
        channel=ChannelParams(**d["channel"]),
        learn=LearnParams(**d["learn"]),
        compute=ComputeParams(**{**d["compute"], "gamma_per_class": _tuplify(d["compute"]["gamma_per_class"])}),
        seed=d["seed"],
    )


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(s), fh, indent=1)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
