"""Episode environment: task allocation MDP over the physical simulator.

Event-stepped: each decision step a UAV flies at most one route leg (station ->
task, task -> task, or return). Per-UAV mission clocks order simultaneous
arrivals so duplicate collections resolve first-arrival-wins. Coordination
(proximity exchange, periodic sync, conflict release) runs as a synchronous
phase inside step().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import compute, coordination, physics, routing
from .scenario import MB, Scenario, TaskClass, TaskStatus, task_value


class ContractViolation(RuntimeError):
    """An agent submitted an action its mask forbids."""


class UnknownAgentError(KeyError):
    pass


class Phase(IntEnum):
    AT_STATION = 0
    TRANSIT = 1
    COLLECTING = 2   # holding position in the field after finishing its stops
    RETURNING = 3
    LANDED = 4


@dataclass
class UavState:
    spec_ref: int
    owner_station: int
    position: tuple
    flight_battery_J: float
    process_battery_J: float
    storage_free_bytes: float
    route: routing.Route
    phase: Phase = Phase.AT_STATION
    clock_s: float = 0.0
    last_task_id: int | None = None
    collected_tasks: list = field(default_factory=list)
    energy_spent_J: float = 0.0
    flops_used: float = 0.0
    decision_pending: bool = False
    return_time_s: float | None = None
    launched: bool = False

    def accepts_tasks(self) -> bool:
        return self.phase in (Phase.AT_STATION, Phase.TRANSIT, Phase.COLLECTING)


NOOP = 0

SIZE_SCALE = 500 * MB


class Env:
    """Single-writer environment; observations are value snapshots."""

    def __init__(self, scenario: Scenario, sharing: bool = True,
                 centralized: bool = False, seed: int = 0):
        self.scenario = scenario
        self.sharing = sharing
        self.centralized = centralized
        self.seed = seed
        self.k = scenario.learn.candidate_k
        self.horizon = scenario.learn.horizon_steps
        self.profiles = [physics.power_profile(u) for u in scenario.uavs]
        self.reset(seed)

    # ------------------------------------------------------------------ setup

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        sc = self.scenario
        self.time_step = 0
        self.done = False
        self.duplicate_collections = 0
        self.trajectory: list[dict] = []
        for t in sc.tasks:
            t.status = TaskStatus.UNASSIGNED
            t.assigned_to = None
            t.collected_by = None
            t.processed_fraction = 0.0
        self.uav_states = []
        for i, u in enumerate(sc.uavs):
            sx, sy = sc.region.station_positions[u.home_station]
            self.uav_states.append(UavState(
                spec_ref=i, owner_station=u.home_station, position=(sx, sy, 0.0),
                flight_battery_J=u.battery_flight_J,
                process_battery_J=u.battery_process_J,
                storage_free_bytes=u.storage_bytes,
                route=routing.Route(uav_id=i, depot=u.home_station),
            ))
        self.beliefs = {}
        for g in range(sc.n_stations):
            b = coordination.StationBeliefs(owner=g)
            for h in range(sc.n_stations):
                b.entries[h] = coordination.snapshot_station(self, h)
            self.beliefs[g] = b
        self._candidate_cache: dict = {}
        return self

    @property
    def agents(self) -> list:
        if self.centralized:
            return ["global"]
        return list(range(self.scenario.n_stations))

    def _stations_of(self, agent):
        if agent == "global":
            return list(range(self.scenario.n_stations))
        if agent not in range(self.scenario.n_stations):
            raise UnknownAgentError(agent)
        return [agent]

    def agent_uavs(self, agent) -> list:
        out = []
        for g in self._stations_of(agent):
            out.extend(self.scenario.station_uavs(g))
        return sorted(out)

    # ------------------------------------------------------ beliefs and views

    def believed_allocated(self, agent) -> set:
        """Tasks the agent believes are planned or already collected."""
        out = set()
        for g in self._stations_of(agent):
            for entry in self.beliefs[g].entries.values():
                out |= entry.planned_tasks
                out |= entry.collected_tasks
        if agent == "global":
            # centralized control sees ground truth
            for u in self.uav_states:
                out |= set(u.route.stops)
                out |= set(u.collected_tasks)
            out |= {t.id for t in self.scenario.tasks if t.collected_by is not None}
        return out

    def believed_collected(self, agent) -> set:
        if agent == "global":
            return {t.id for t in self.scenario.tasks if t.collected_by is not None}
        out = set()
        for g in self._stations_of(agent):
            for entry in self.beliefs[g].entries.values():
                out |= entry.collected_tasks
        return out

    def believed_collection_rate(self, agent) -> float:
        n = len(self.scenario.tasks)
        if n == 0:
            return 1.0
        return len(self.believed_collected(agent)) / n

    # --------------------------------------------------------- candidate sets

    def candidates(self, agent) -> dict:
        """Per-UAV lists of the k nearest believed-uncollected tasks."""
        key = (self.time_step, agent)
        if key in self._candidate_cache:
            return self._candidate_cache[key]
        collected = self.believed_collected(agent)
        open_tasks = [t for t in self.scenario.tasks if t.id not in collected]
        out = {}
        for uav_id in self.agent_uavs(agent):
            u = self.uav_states[uav_id]
            ranked = sorted(
                open_tasks,
                key=lambda t: (routing.euclidean_xy(u.position, t.position), t.id),
            )
            out[uav_id] = [t.id for t in ranked[: self.k]]
        self._candidate_cache[key] = out
        return out

    def action_mask(self, agent) -> dict:
        """Per-UAV boolean vectors of length k+1; Noop is always admissible."""
        cands = self.candidates(agent)
        allocated = self.believed_allocated(agent)
        masks = {}
        for uav_id, cand in cands.items():
            u = self.uav_states[uav_id]
            mask = np.zeros(self.k + 1, dtype=bool)
            mask[NOOP] = True
            if u.accepts_tasks():
                for j, tid in enumerate(cand):
                    if tid in allocated:
                        continue
                    if tid in u.route.stops:
                        continue
                    if self._extension_feasible(u, tid):
                        mask[j + 1] = True
            masks[uav_id] = mask
        return masks

    def _remaining_route_eval(self, u: UavState, stops: list):
        """Simulate the rest of a route from the UAV's current state."""
        sc = self.scenario
        uav = sc.uavs[u.spec_ref]
        profile = self.profiles[u.spec_ref]
        tasks = {t.id: t for t in sc.tasks}
        depot_xy = sc.region.station_positions[uav.home_station]
        flops_budget = compute.uav_capacity(uav) * sc.learn.mission_time_s

        flight = 0.0
        process = 0.0
        storage = 0.0
        flops = u.flops_used
        prev_pos = u.position
        prev_task = tasks.get(u.last_task_id) if u.last_task_id is not None else None
        for tid in stops:
            task = tasks[tid]
            cruise = (task.position[0], task.position[1], uav.z_max_m)
            if prev_task is None:
                d = routing.euclidean_xy(prev_pos, cruise)
            else:
                d = routing.curved_distance(prev_task, task, sc.compute)
            flight += routing._leg_energy(d, prev_pos[2], cruise[2], uav, profile)
            rate = None
            if task.task_class == TaskClass.EDGE_VIDEO:
                rate = routing.edge_link_rate(uav, task, sc.channel)
            flight += physics.task_energy(task, uav, profile, link_rate_bps=rate)
            beta = compute.greedy_beta(task, params=sc.compute, learn=sc.learn,
                                       remaining_process_J=u.process_battery_J - process,
                                       remaining_flops=flops_budget - flops)
            process += compute.processing_energy(task, beta, sc.learn)
            flops += compute.task_flops(task, beta, sc.compute)
            storage += compute.residual_storage(task, beta)
            prev_pos, prev_task = cruise, task
        d = routing.euclidean_xy(prev_pos, depot_xy)
        flight += routing._leg_energy(d, prev_pos[2], 0.0, uav, profile)
        return flight, process, storage

    def _extension_feasible(self, u: UavState, tid: int) -> bool:
        stops, _ = self._cheapest_insertion_live(u, tid)
        flight, process, storage = self._remaining_route_eval(u, stops)
        return (flight <= u.flight_battery_J
                and process <= u.process_battery_J
                and storage <= u.storage_free_bytes)

    def _cheapest_insertion_live(self, u: UavState, tid: int):
        best = None
        base = self._remaining_distance(u, u.route.stops)
        for pos in range(len(u.route.stops) + 1):
            cand = u.route.stops[:pos] + [tid] + u.route.stops[pos:]
            d = self._remaining_distance(u, cand)
            if best is None or d < best[1] - 1e-15:
                best = (cand, d)
        return best[0], best[1] - base

    def _remaining_distance(self, u: UavState, stops: list) -> float:
        sc = self.scenario
        tasks = {t.id: t for t in sc.tasks}
        depot_xy = sc.region.station_positions[u.owner_station]
        prev_pos = u.position
        prev_task = tasks.get(u.last_task_id) if u.last_task_id is not None else None
        total = 0.0
        for tid in stops:
            task = tasks[tid]
            if prev_task is None:
                total += routing.euclidean_xy(prev_pos, task.position)
            else:
                total += routing.curved_distance(prev_task, task, sc.compute)
            prev_pos, prev_task = task.position, task
        total += routing.euclidean_xy(prev_pos, depot_xy)
        return total

    # ---------------------------------------------------------- observations

    def obs_dim(self, agent) -> int:
        m = len(self.agent_uavs(agent))
        g_peers = 0 if agent == "global" else self.scenario.n_stations - 1
        return m * (6 + 6 * self.k) + 3 * g_peers + 1

    def observe(self, agent) -> np.ndarray:
        """Feature vector from the agent's own UAVs plus decayed peer beliefs."""
        sc = self.scenario
        a = sc.region.side_length_m
        lam = sc.learn.lambda_decay
        cands = self.candidates(agent)
        allocated = self.believed_allocated(agent)
        feats = []
        tasks = {t.id: t for t in sc.tasks}
        for uav_id in self.agent_uavs(agent):
            u = self.uav_states[uav_id]
            spec = sc.uavs[uav_id]
            feats += [u.flight_battery_J / spec.battery_flight_J,
                      u.process_battery_J / spec.battery_process_J,
                      u.storage_free_bytes / spec.storage_bytes,
                      u.position[0] / a, u.position[1] / a,
                      int(u.phase) / 4.0]
            for j in range(self.k):
                if j < len(cands[uav_id]):
                    t = tasks[cands[uav_id][j]]
                    feats += [1.0,
                              (t.position[0] - u.position[0]) / a,
                              (t.position[1] - u.position[1]) / a,
                              int(t.task_class) / 3.0,
                              t.data_size_bytes / SIZE_SCALE,
                              1.0 if t.id in allocated else 0.0]
                else:
                    feats += [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        if agent != "global":
            g = agent
            for h in sorted(self.beliefs[g].entries):
                if h == g:
                    continue
                entry = self.beliefs[g].entries[h]
                age_factor = math.exp(-lam * (self.time_step - entry.last_update_step))
                if entry.uav_beliefs:
                    avail = np.mean([b.available for b in entry.uav_beliefs.values()])
                    batt = np.mean([
                        b.battery_flight_J / sc.uavs[i].battery_flight_J
                        for i, b in entry.uav_beliefs.items()])
                else:
                    avail, batt = 0.0, 0.0
                feats += [coordination.decay_estimate(avail, self.time_step,
                                                      entry.last_update_step, lam),
                          coordination.decay_estimate(batt, self.time_step,
                                                      entry.last_update_step, lam),
                          age_factor]
        feats.append(self.time_step / max(1, self.horizon))
        return np.array(feats, dtype=float)

    # ---------------------------------------------------------------- reward

    @staticmethod
    def reward_fn(tasks_progressed, collection_rate, learn) -> float:
        """Collection-rate-weighted value of progressed tasks minus energy penalty.

        tasks_progressed: iterable of (task, completion_fraction, process_energy_J).
        """
        r = 0.0
        for task, cr, e_proc in tasks_progressed:
            if not (0.0 <= cr <= 1.0):
                raise ValueError("completion fraction out of [0, 1]")
            r += collection_rate * (
                learn.reward_mu * (math.exp(learn.reward_omega * cr) - 1.0) / 3.0
                * task.priority
                - learn.reward_epsilon * e_proc
            ) * learn.reward_phi
        return r

    # ------------------------------------------------------------------ step

    def step(self, actions: dict):
        """Apply actions, advance one decision epoch, run coordination, reward."""
        if self.done:
            raise RuntimeError("episode already done")
        sc = self.scenario
        record = {"t": self.time_step, "actions": {}, "collections": [],
                  "share_events": [], "released": [], "rewards": {}}

        # 1. apply assignments
        for agent in self.agents:
            act = actions.get(agent)
            if act is None:
                act = [NOOP] * len(self.agent_uavs(agent))
            masks = self.action_mask(agent)
            cands = self.candidates(agent)
            uav_ids = self.agent_uavs(agent)
            if len(act) != len(uav_ids):
                raise ContractViolation(f"agent {agent}: expected {len(uav_ids)} choices")
            record["actions"][str(agent)] = list(map(int, act))
            taken = set()   # one decision-maker never double-assigns in a step
            for uav_id, choice in zip(uav_ids, act):
                u = self.uav_states[uav_id]
                u.decision_pending = False
                if choice == NOOP:
                    continue
                if not masks[uav_id][choice]:
                    raise ContractViolation(
                        f"agent {agent} chose masked action {choice} for UAV {uav_id}")
                tid = cands[uav_id][choice - 1]
                if tid in taken:
                    continue
                taken.add(tid)
                stops, _ = self._cheapest_insertion_live(u, tid)
                u.route.stops = stops
                task = next(t for t in sc.tasks if t.id == tid)
                task.status = TaskStatus.ASSIGNED
                task.assigned_to = uav_id
                if u.phase in (Phase.AT_STATION, Phase.COLLECTING):
                    u.phase = Phase.TRANSIT
                    u.launched = True

        # 2. movement: one leg per UAV, arrivals ordered by mission clock
        movers = []
        for u in self.uav_states:
            if u.phase == Phase.TRANSIT and u.route.stops:
                movers.append(u)
            elif u.phase == Phase.TRANSIT and not u.route.stops:
                u.phase = Phase.COLLECTING
            elif u.phase == Phase.COLLECTING and not u.decision_pending:
                u.phase = Phase.RETURNING
                movers.append(u)
            elif u.phase == Phase.RETURNING:
                movers.append(u)

        arrivals = []
        for u in movers:
            if u.phase == Phase.RETURNING:
                arrivals.append((u.clock_s, 1, u.spec_ref, None))
            else:
                tid = u.route.stops[0]
                task = next(t for t in sc.tasks if t.id == tid)
                uav = sc.uavs[u.spec_ref]
                cruise = (task.position[0], task.position[1], uav.z_max_m)
                leg_t = physics.leg_flight_time(u.position, cruise, uav)
                arrivals.append((u.clock_s + leg_t, 0, u.spec_ref, tid))
        arrivals.sort()

        rewards_events: dict = {g: [] for g in self.agents}
        for _, _, uav_id, tid in arrivals:
            u = self.uav_states[uav_id]
            if tid is None:
                self._fly_home(u)
            else:
                self._fly_and_collect(u, tid, record, rewards_events)

        # 3. coordination phase
        refreshed_pairs = []
        if self.sharing and not self.centralized:
            events = coordination.proximity_exchange(self, sc.learn.d_threshold_m)
            events += coordination.periodic_sync(self, self.time_step + 1)
            for ev in events:
                if ev.kind == "proximity":
                    refreshed_pairs.append(tuple(ev.stations))
                record["share_events"].append(
                    {"kind": ev.kind, "step": ev.step, "stations": list(ev.stations)})
            if any(ev.kind == "periodic" for ev in events):
                stations = list(range(sc.n_stations))
                refreshed_pairs += [(g, h) for g in stations for h in stations if g < h]
            if refreshed_pairs:
                record["released"] = coordination.dedupe_on_refresh(self, refreshed_pairs)
        if self.centralized:
            # single decision-maker: beliefs track truth every step
            for g in range(sc.n_stations):
                for h in range(sc.n_stations):
                    self.beliefs[g].entries[h] = coordination.snapshot_station(self, h)

        # own-station entries always current
        for g in range(sc.n_stations):
            self.beliefs[g].entries[g] = coordination.snapshot_station(self, g)

        # 4. rewards
        rewards = {}
        for agent in self.agents:
            cr = self.believed_collection_rate(agent)
            rewards[agent] = self.reward_fn(rewards_events[agent], cr, sc.learn)
        if sc.learn.shared_global_reward and not self.centralized:
            total = sum(rewards.values())
            rewards = {g: total for g in rewards}
        record["rewards"] = {str(g): r for g, r in rewards.items()}

        # 5. time, forced return, termination
        self.time_step += 1
        self._candidate_cache.clear()
        if self.time_step >= self.horizon:
            for u in self.uav_states:
                if u.phase in (Phase.TRANSIT, Phase.COLLECTING):
                    for tid in list(u.route.stops):
                        self.release_task(u.spec_ref, tid)
                    u.phase = Phase.RETURNING
        self.done = all(u.phase in (Phase.AT_STATION, Phase.LANDED)
                        for u in self.uav_states) and (
            self.time_step >= self.horizon
            or all(t.collected_by is not None for t in self.scenario.tasks))

        record["uavs"] = [self._uav_digest(u) for u in self.uav_states]
        record["done"] = self.done
        self.trajectory.append(record)
        self._assert_invariants()
        return self, rewards, self.done

    # ------------------------------------------------------------- movement

    def _fly_home(self, u: UavState):
        sc = self.scenario
        uav = sc.uavs[u.spec_ref]
        profile = self.profiles[u.spec_ref]
        sx, sy = sc.region.station_positions[u.owner_station]
        home = (sx, sy, 0.0)
        e = physics.leg_flight_energy(u.position, home, uav, profile)
        t = physics.leg_flight_time(u.position, home, uav)
        self._spend_flight(u, e)
        u.clock_s += t
        u.position = home
        u.phase = Phase.LANDED
        u.last_task_id = None
        u.return_time_s = u.clock_s

    def _fly_and_collect(self, u: UavState, tid: int, record, rewards_events):
        sc = self.scenario
        uav = sc.uavs[u.spec_ref]
        profile = self.profiles[u.spec_ref]
        task = next(t for t in sc.tasks if t.id == tid)
        cruise = (task.position[0], task.position[1], uav.z_max_m)
        # legs between tasks follow the curved metric, matching route evaluation
        prev_task = (next((x for x in sc.tasks if x.id == u.last_task_id), None)
                     if u.last_task_id is not None else None)
        if prev_task is None:
            d = routing.euclidean_xy(u.position, cruise)
        else:
            d = routing.curved_distance(prev_task, task, sc.compute)
        dz = cruise[2] - u.position[2]
        e = d / uav.cruise_speed_mps * profile.p_cruise_W
        t = d / uav.cruise_speed_mps
        if dz > 0:
            e += profile.p_ascent_W * (dz / uav.ascend_speed_mps)
            t += dz / uav.ascend_speed_mps
        elif dz < 0:
            e += profile.p_descent_W * (-dz / uav.descend_speed_mps)
            t += -dz / uav.descend_speed_mps
        self._spend_flight(u, e)
        u.clock_s += t
        u.position = cruise
        u.route.stops.remove(tid)

        if task.collected_by is not None:
            # someone got here first; travel energy is wasted
            self.duplicate_collections += 1
            record["collections"].append(
                {"task": tid, "uav": u.spec_ref, "duplicate": True})
            if task.assigned_to == u.spec_ref:
                task.assigned_to = task.collected_by
        else:
            rate = None
            if task.task_class == TaskClass.EDGE_VIDEO:
                rate = routing.edge_link_rate(uav, task, sc.channel)
            e_task = physics.task_energy(task, uav, profile, link_rate_bps=rate)
            self._spend_flight(u, e_task)
            u.clock_s += physics.task_collect_time(task, profile, link_rate_bps=rate)
            flops_budget = compute.uav_capacity(uav) * sc.learn.mission_time_s
            beta = compute.greedy_beta(task, params=sc.compute, learn=sc.learn,
                                       remaining_process_J=u.process_battery_J,
                                       remaining_flops=flops_budget - u.flops_used)
            e_proc = compute.processing_energy(task, beta, sc.learn)
            u.process_battery_J -= e_proc
            u.flops_used += compute.task_flops(task, beta, sc.compute)
            u.storage_free_bytes -= compute.residual_storage(task, beta)
            task.collected_by = u.spec_ref
            task.processed_fraction = beta
            task.status = (TaskStatus.COMPLETED if beta >= 1.0 - 1e-12
                           else TaskStatus.PARTIALLY_PROCESSED if beta > 0
                           else TaskStatus.COLLECTED)
            u.collected_tasks.append(tid)
            record["collections"].append(
                {"task": tid, "uav": u.spec_ref, "duplicate": False, "beta": beta,
                 "process_energy_J": e_proc})
            agent = "global" if self.centralized else u.owner_station
            rewards_events[agent].append((task, beta, e_proc))

        u.last_task_id = tid
        if not u.route.stops:
            u.phase = Phase.COLLECTING
            u.decision_pending = True

    def _spend_flight(self, u: UavState, energy: float):
        u.flight_battery_J -= energy
        u.energy_spent_J += energy
        if u.flight_battery_J < -1e-6:
            raise RuntimeError(f"UAV {u.spec_ref} flight battery went negative "
                               f"({u.flight_battery_J:.3f} J): mask unsound")
        u.flight_battery_J = max(0.0, u.flight_battery_J)

    def release_task(self, uav_id: int, tid: int):
        u = self.uav_states[uav_id]
        if tid in u.route.stops:
            u.route.stops.remove(tid)
        task = next(t for t in self.scenario.tasks if t.id == tid)
        if task.collected_by is None and task.assigned_to == uav_id:
            still_planned = any(tid in w.route.stops for w in self.uav_states)
            if not still_planned:
                task.status = TaskStatus.UNASSIGNED
                task.assigned_to = None

    # ---------------------------------------------------------------- misc

    def _uav_digest(self, u: UavState) -> dict:
        return {"id": u.spec_ref, "pos": [round(p, 3) for p in u.position],
                "flight_J": u.flight_battery_J, "process_J": u.process_battery_J,
                "storage_free": u.storage_free_bytes, "phase": int(u.phase),
                "clock_s": u.clock_s, "energy_spent_J": u.energy_spent_J}

    def _assert_invariants(self):
        for u, spec in zip(self.uav_states, self.scenario.uavs):
            assert -1e-6 <= u.flight_battery_J <= spec.battery_flight_J + 1e-6
            assert -1e-6 <= u.process_battery_J <= spec.battery_process_J + 1e-6
            assert -1e-6 <= u.storage_free_bytes <= spec.storage_bytes + 1e-6
            ledger = spec.battery_flight_J - u.energy_spent_J
            assert abs(ledger - u.flight_battery_J) < 1e-6
        collectors = {}
        for t in self.scenario.tasks:
            if t.collected_by is not None:
                collectors.setdefault(t.id, t.collected_by)
                assert collectors[t.id] == t.collected_by

    def force_assign(self, uav_id: int, stops: list):
        """Load a precomputed route (baseline rollouts); bypasses the mask."""
        u = self.uav_states[uav_id]
        u.route.stops = list(stops)
        for tid in stops:
            task = next(t for t in self.scenario.tasks if t.id == tid)
            task.status = TaskStatus.ASSIGNED
            task.assigned_to = uav_id
        if stops:
            u.phase = Phase.TRANSIT
            u.launched = True
        for g in range(self.scenario.n_stations):
            self.beliefs[g].entries[g] = coordination.snapshot_station(self, g)


def rollout_assignment(scenario: Scenario, assignment: routing.Assignment,
                       seed: int = 0) -> Env:
    """Execute a static assignment to completion and return the finished env."""
    env = Env(scenario, sharing=False, seed=seed)
    for uav_id, route in assignment.routes.items():
        if route.stops:
            env.force_assign(uav_id, route.stops)
    while not env.done:
        env.step({g: [NOOP] * len(env.agent_uavs(g)) for g in env.agents})
    return env
