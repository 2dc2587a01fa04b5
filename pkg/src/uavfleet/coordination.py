"""Information-sharing layer between ground stations.

Proximity-triggered pairwise exchange when cross-station UAVs pass close by,
full periodic synchronization every t0_sync steps, exponential decay estimates
for stale peer entries, and the closed-form staleness-gap diagnostics.

Runs as a synchronous phase inside the environment step; the environment object
passed in only needs `scenario`, `time_step`, `uav_states`, and `beliefs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import routing


class ClockError(ValueError):
    pass


@dataclass
class UavBelief:
    position: tuple
    battery_flight_J: float
    battery_process_J: float
    storage_free_bytes: float
    phase: int
    available: bool


@dataclass
class StationEntry:
    uav_beliefs: dict = field(default_factory=dict)   # uav_id -> UavBelief
    planned_tasks: set = field(default_factory=set)
    collected_tasks: set = field(default_factory=set)
    last_update_step: int = 0


@dataclass
class StationBeliefs:
    owner: int
    entries: dict = field(default_factory=dict)       # station_id -> StationEntry


@dataclass
class ShareEvent:
    kind: str            # "proximity" or "periodic"
    step: int
    stations: tuple
    uavs: tuple = ()


def snapshot_station(env, station: int) -> StationEntry:
    """Ground-truth summary of one station's UAVs and plans."""
    entry = StationEntry(last_update_step=env.time_step)
    for uav_id in env.scenario.station_uavs(station):
        u = env.uav_states[uav_id]
        entry.uav_beliefs[uav_id] = UavBelief(
            position=tuple(u.position),
            battery_flight_J=u.flight_battery_J,
            battery_process_J=u.process_battery_J,
            storage_free_bytes=u.storage_free_bytes,
            phase=int(u.phase),
            available=u.accepts_tasks(),
        )
        entry.planned_tasks.update(u.route.stops)
        entry.collected_tasks.update(u.collected_tasks)
    return entry


def refresh_pair(env, g: int, h: int) -> None:
    """Replace g's beliefs about h and h's about g with current truth."""
    env.beliefs[g].entries[h] = snapshot_station(env, h)
    env.beliefs[h].entries[g] = snapshot_station(env, g)


def proximity_exchange(env, d_threshold_m: float) -> list:
    """Pairwise belief refresh between stations whose UAVs pass within threshold."""
    events = []
    refreshed = set()
    uavs = env.uav_states
    n = len(uavs)
    for i in range(n):
        for j in range(i + 1, n):
            gi = env.scenario.uavs[i].home_station
            gj = env.scenario.uavs[j].home_station
            if gi == gj:
                continue
            if _dist3(uavs[i].position, uavs[j].position) <= d_threshold_m:
                pair = (min(gi, gj), max(gi, gj))
                if pair in refreshed:
                    continue
                refreshed.add(pair)
                refresh_pair(env, gi, gj)
                events.append(ShareEvent(kind="proximity", step=env.time_step,
                                         stations=pair, uavs=(i, j)))
    return events


def periodic_sync(env, t: int) -> list:
    """Every t0_sync steps, every station pair refreshes (satellite relay stand-in)."""
    t0 = env.scenario.learn.t0_sync
    if t % t0 != 0:
        return []
    stations = range(env.scenario.n_stations)
    events = []
    for g in stations:
        for h in stations:
            if g < h:
                refresh_pair(env, g, h)
        events.append(ShareEvent(kind="periodic", step=t, stations=(g,)))
    return events


def decay_estimate(value: float, t: int, last_update_step: int, lam: float) -> float:
    """Last-known magnitude down-weighted by e^(-lambda * age)."""
    if t < last_update_step:
        raise ClockError(f"query time {t} precedes last update {last_update_step}")
    return value * math.exp(-lam * (t - last_update_step))


def worst_case_gap(i0: float, lam: float, t0: int) -> float:
    """Surviving information magnitude when no update arrives for a full interval."""
    return i0 * math.exp(-lam * t0)


def expected_gap(i0: float, lam: float, t0: int, p: float, k: int) -> float:
    """Binomially weighted decay magnitude over a sync interval (diagnostic).

    Evaluated exactly as printed; note the p=1 limit returns i0, not 0.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0, 1]")
    if k < 2:
        raise ValueError("need at least 2 stations")
    q = (1.0 - p) ** (k - 1)
    weights = [math.comb(t0, n) * q ** n * (1.0 - q) ** (t0 - n)
               for n in range(t0 + 1)]
    # the weights sum to 1 analytically; normalizing keeps the lambda=0 limit
    # exactly i0 despite floating-point summation error
    total = sum(w * math.exp(-lam * n) for n, w in enumerate(weights))
    return i0 * (total / sum(weights))


def dedupe_on_refresh(env, refreshed_pairs) -> list:
    """Resolve duplicate pending plans between stations that just synchronized.

    For each task planned by UAVs of two refreshed stations, the holder whose
    route pays the higher marginal (curved-metric) distance releases it; ties
    keep the lower station id. Released tasks return to the unassigned pool.
    """
    holders: dict[int, list] = {}
    for uav_id, u in enumerate(env.uav_states):
        for tid in u.route.stops:
            holders.setdefault(tid, []).append(uav_id)
    released = []
    for tid, uav_ids in holders.items():
        if len(uav_ids) < 2:
            continue
        stations = {env.scenario.uavs[i].home_station for i in uav_ids}
        if len(stations) < 2:
            continue
        aware = {frozenset(pair) for pair in refreshed_pairs}
        costed = []
        for uav_id in uav_ids:
            g = env.scenario.uavs[uav_id].home_station
            stops = env.uav_states[uav_id].route.stops
            with_t = routing.evaluate_route(uav_id, stops, env.scenario).distance_m
            without = routing.evaluate_route(uav_id, [s for s in stops if s != tid],
                                             env.scenario).distance_m
            costed.append((with_t - without, g, uav_id))
        costed.sort(key=lambda c: (c[0], c[1]))
        keeper_station = costed[0][1]
        for cost, g, uav_id in costed[1:]:
            if frozenset((keeper_station, g)) not in aware and keeper_station != g:
                continue  # these stations have not exchanged; conflict stays hidden
            env.release_task(uav_id, tid)
            released.append(tid)
    return released


def _dist3(p, q) -> float:
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2)
