"""Selective multi-depot routing layer.

Curved inter-task distance metric, route evaluation against the energy /
storage / processing constraints, the value-minus-distance objective, and an
exhaustive solver for desk-scale instances.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

from . import channel, compute, physics
from .scenario import Scenario, Task, TaskClass, task_value

log = logging.getLogger(__name__)

THETA_CAP = math.pi - 1e-6

_clamp_warned: set = set()


class RoutingError(ValueError):
    pass


class InfeasibleAssignmentError(RoutingError):
    def __init__(self, report):
        super().__init__(f"assignment infeasible: {report.summary()}")
        self.report = report


def task_load(task: Task, params) -> float:
    """Compute-times-storage load product used by the curved metric."""
    c = params.gamma(task.task_class) * task.data_size_bytes
    s = task.data_size_bytes
    if c <= 0 or s <= 0:
        raise RoutingError(f"task {task.id} has nonpositive load")
    return c * s


def euclidean_xy(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def curved_distance(task_n: Task, task_m: Task, params) -> float:
    """Arc-inflated travel distance from task n to task m (not symmetric)."""
    d = euclidean_xy(task_n.position, task_m.position)
    theta = max(0.0, math.log(task_load(task_n, params) / task_load(task_m, params)) - 1.0)
    if theta == 0.0:
        return d
    if theta >= THETA_CAP:
        if (task_n.id, task_m.id) not in _clamp_warned:
            _clamp_warned.add((task_n.id, task_m.id))
            log.warning("central angle %.3f clamped below pi for tasks %d -> %d",
                        theta, task_n.id, task_m.id)
        theta = THETA_CAP
    return d * theta / (2.0 * math.sin(theta / 2.0))


@dataclass
class Route:
    uav_id: int
    depot: int
    stops: list = field(default_factory=list)
    total_distance_m: float = 0.0
    flight_energy_J: float = 0.0
    process_energy_J: float = 0.0
    storage_used_bytes: float = 0.0


@dataclass
class Assignment:
    routes: dict            # uav_id -> Route
    unassigned: set

    def assigned_tasks(self) -> list:
        out = []
        for r in self.routes.values():
            out.extend(r.stops)
        return out

    def to_dict(self) -> dict:
        return {
            "routes": {str(u): {"depot": r.depot, "stops": list(r.stops)}
                       for u, r in self.routes.items()},
            "unassigned": sorted(self.unassigned),
        }


@dataclass
class Violation:
    constraint: str         # one of b, c, d, e, f or structural
    uav_id: int | None
    task_id: int | None
    message: str


@dataclass
class FeasibilityReport:
    violations: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        return "; ".join(f"({v.constraint}) {v.message}" for v in self.violations) or "feasible"


@dataclass
class RouteEval:
    distance_m: float
    flight_energy_J: float
    process_energy_J: float
    storage_used_bytes: float
    flops_used: float
    betas: dict             # task_id -> onboard fraction
    collect_rate_bps: dict  # task_id -> link rate used for class-2 pickups


def edge_link_rate(uav, task: Task, params) -> float:
    """U2G rate while hovering directly above a ground pickup at z_min."""
    hover = (task.position[0], task.position[1], uav.z_min_m)
    return channel.rate_u2g(uav, hover, (task.position[0], task.position[1], 0.0), params)


def evaluate_route(uav_id: int, stops: list, scenario: Scenario,
                   profile: physics.PowerProfile | None = None) -> RouteEval:
    """Simulate a route deterministically: legs, maneuvers, greedy onboard processing.

    The onboard fraction per stop is chosen greedily against the remaining
    processing-energy and FLOPs budgets, in visit order.
    """
    uav = scenario.uavs[uav_id]
    if profile is None:
        profile = physics.power_profile(uav)
    depot_xy = scenario.region.station_positions[uav.home_station]
    depot_ground = (depot_xy[0], depot_xy[1], 0.0)

    tasks = {t.id: t for t in scenario.tasks}
    learn = scenario.learn
    comp = scenario.compute
    flops_budget = compute.uav_capacity(uav) * learn.mission_time_s

    distance = 0.0
    flight = 0.0
    process = 0.0
    storage = 0.0
    flops_used = 0.0
    betas = {}
    rates = {}

    prev_pos = depot_ground
    prev_task = None
    for tid in stops:
        if tid not in tasks:
            raise RoutingError(f"unknown task id {tid}")
        task = tasks[tid]
        cruise_pos = (task.position[0], task.position[1], uav.z_max_m)
        if prev_task is None:
            d = euclidean_xy(prev_pos, cruise_pos)
        else:
            d = curved_distance(prev_task, task, comp)
        distance += d
        flight += _leg_energy(d, prev_pos[2], uav.z_max_m, uav, profile)

        rate = None
        if task.task_class == TaskClass.EDGE_VIDEO:
            rate = edge_link_rate(uav, task, scenario.channel)
            rates[tid] = rate
        flight += physics.task_energy(task, uav, profile, link_rate_bps=rate)

        beta = compute.greedy_beta(task, learn=learn, params=comp,
                                   remaining_process_J=uav.battery_process_J - process,
                                   remaining_flops=flops_budget - flops_used)
        betas[tid] = beta
        process += compute.processing_energy(task, beta, learn)
        flops_used += compute.task_flops(task, beta, comp)
        storage += compute.residual_storage(task, beta)

        prev_pos = cruise_pos
        prev_task = task

    # return to depot (Euclidean; the curved metric is defined between tasks only)
    d = euclidean_xy(prev_pos, depot_ground)
    distance += d
    flight += _leg_energy(d, prev_pos[2], depot_ground[2], uav, profile)

    return RouteEval(distance_m=distance, flight_energy_J=flight,
                     process_energy_J=process, storage_used_bytes=storage,
                     flops_used=flops_used, betas=betas, collect_rate_bps=rates)


def _leg_energy(horiz_m: float, z_from: float, z_to: float, uav, profile) -> float:
    e = horiz_m / uav.cruise_speed_mps * profile.p_cruise_W
    dz = z_to - z_from
    if dz > 0:
        e += profile.p_ascent_W * dz / uav.ascend_speed_mps
    elif dz < 0:
        e += profile.p_descent_W * (-dz) / uav.descend_speed_mps
    return e


def build_route(uav_id: int, stops: list, scenario: Scenario) -> Route:
    ev = evaluate_route(uav_id, stops, scenario)
    return Route(uav_id=uav_id, depot=scenario.uavs[uav_id].home_station,
                 stops=list(stops), total_distance_m=ev.distance_m,
                 flight_energy_J=ev.flight_energy_J, process_energy_J=ev.process_energy_J,
                 storage_used_bytes=ev.storage_used_bytes)


def check_feasible(assignment: Assignment, scenario: Scenario) -> FeasibilityReport:
    """Check every resource constraint, reporting each violation by UAV/task."""
    report = FeasibilityReport()
    task_ids = {t.id for t in scenario.tasks}
    seen: dict[int, int] = {}
    for uav_id, route in assignment.routes.items():
        if uav_id < 0 or uav_id >= len(scenario.uavs):
            report.violations.append(Violation("structural", uav_id, None, f"unknown UAV {uav_id}"))
            continue
        uav = scenario.uavs[uav_id]
        if route.depot != uav.home_station:
            report.violations.append(Violation("structural", uav_id, None,
                                               f"route depot {route.depot} is not UAV {uav_id}'s home"))
        structural = False
        local = set()
        for tid in route.stops:
            if tid not in task_ids:
                report.violations.append(Violation("structural", uav_id, tid, f"unknown task {tid}"))
                structural = True
            elif tid in seen or tid in local:
                report.violations.append(Violation("b", uav_id, tid,
                                                   f"task {tid} assigned more than once"))
            local.add(tid)
        seen.update({tid: uav_id for tid in local})
        if structural:
            continue
        ev = evaluate_route(uav_id, route.stops, scenario)
        if ev.flight_energy_J > uav.battery_flight_J * (1 + 1e-12):
            report.violations.append(Violation("c", uav_id, None,
                f"flight energy {ev.flight_energy_J:.0f} J exceeds {uav.battery_flight_J:.0f} J"))
        if ev.process_energy_J > uav.battery_process_J * (1 + 1e-12):
            report.violations.append(Violation("f", uav_id, None,
                f"processing energy {ev.process_energy_J:.0f} J exceeds {uav.battery_process_J:.0f} J"))
        if ev.storage_used_bytes > uav.storage_bytes * (1 + 1e-12):
            report.violations.append(Violation("d", uav_id, None,
                f"storage {ev.storage_used_bytes:.0f} B exceeds {uav.storage_bytes:.0f} B"))
        flops_budget = compute.uav_capacity(uav) * scenario.learn.mission_time_s
        if ev.flops_used > flops_budget * (1 + 1e-12):
            report.violations.append(Violation("e", uav_id, None,
                f"processing load {ev.flops_used:.3g} FLOPs exceeds {flops_budget:.3g}"))
    return report


def objective(assignment: Assignment, scenario: Scenario) -> float:
    """Collected task value minus distance cost (scaled by move_energy_scale)."""
    report = check_feasible(assignment, scenario)
    if not report.feasible:
        raise InfeasibleAssignmentError(report)
    tasks = {t.id: t for t in scenario.tasks}
    value = sum(task_value(tasks[tid]) for tid in assignment.assigned_tasks())
    dist = sum(evaluate_route(u, r.stops, scenario).distance_m
               for u, r in assignment.routes.items() if r.stops)
    return value - scenario.learn.move_energy_scale * dist


def empty_assignment(scenario: Scenario) -> Assignment:
    routes = {i: Route(uav_id=i, depot=u.home_station)
              for i, u in enumerate(scenario.uavs)}
    return Assignment(routes=routes, unassigned={t.id for t in scenario.tasks})


def best_route_order(uav_id: int, task_ids: list, scenario: Scenario) -> tuple:
    """Minimum curved-distance ordering of a stop set (exhaustive, <= 6 stops).

    Returns (stops, eval); ties break on lexicographic stop order. The
    objective depends on the ordering only through distance (collected value is
    order-independent), but resource totals are not order-invariant because the
    greedy onboard fraction depends on visit order, so feasibility must be
    checked on the returned ordering.
    """
    best = None
    for perm in itertools.permutations(sorted(task_ids)):
        ev = evaluate_route(uav_id, list(perm), scenario)
        key = (ev.distance_m, perm)
        if best is None or key < best[0]:
            best = (key, list(perm), ev)
    return best[1], best[2]


BUDGET_RTOL = 1e-12   # greedy-beta may saturate a budget to within rounding


def _route_eval_feasible(ev: RouteEval, uav, scenario: Scenario) -> bool:
    flops_budget = compute.uav_capacity(uav) * scenario.learn.mission_time_s
    tol = 1 + BUDGET_RTOL
    return (ev.flight_energy_J <= uav.battery_flight_J * tol
            and ev.process_energy_J <= uav.battery_process_J * tol
            and ev.storage_used_bytes <= uav.storage_bytes * tol
            and ev.flops_used <= flops_budget * tol)


def best_feasible_order(uav_id: int, task_ids: list, scenario: Scenario):
    """Shortest ordering that also passes every budget, or None.

    Orderings are scanned in increasing distance; the first feasible one is
    optimal for the objective since value does not depend on the order.
    """
    uav = scenario.uavs[uav_id]
    ranked = []
    for perm in itertools.permutations(sorted(task_ids)):
        ev = evaluate_route(uav_id, list(perm), scenario)
        ranked.append((ev.distance_m, perm, ev))
    ranked.sort(key=lambda r: (r[0], r[1]))
    for _, perm, ev in ranked:
        if _route_eval_feasible(ev, uav, scenario):
            return list(perm), ev
    return None


def solve_exact(scenario: Scenario, max_tasks: int = 8) -> Assignment:
    """Globally optimal assignment by exhaustive enumeration (small instances only)."""
    n = len(scenario.tasks)
    if n > max_tasks:
        raise RoutingError(f"instance has {n} tasks; exact solver capped at {max_tasks}")
    n_uavs = len(scenario.uavs)
    tasks = scenario.tasks
    learn = scenario.learn

    best_obj = 0.0
    best = empty_assignment(scenario)
    best_key = _encode(best)

    # owner vector: -1 = unassigned, else UAV index
    for owners in itertools.product(range(-1, n_uavs), repeat=n):
        per_uav: dict[int, list] = {}
        for tid, owner in zip((t.id for t in tasks), owners):
            if owner >= 0:
                per_uav.setdefault(owner, []).append(tid)
        if any(len(v) > 6 for v in per_uav.values()):
            continue
        routes = {}
        value = 0.0
        dist = 0.0
        feasible = True
        for uav_id in range(n_uavs):
            stops = per_uav.get(uav_id, [])
            if not stops:
                routes[uav_id] = Route(uav_id=uav_id, depot=scenario.uavs[uav_id].home_station)
                continue
            found = best_feasible_order(uav_id, stops, scenario)
            if found is None:
                feasible = False
                break
            ordered, ev = found
            uav = scenario.uavs[uav_id]
            routes[uav_id] = Route(uav_id=uav_id, depot=uav.home_station, stops=ordered,
                                   total_distance_m=ev.distance_m,
                                   flight_energy_J=ev.flight_energy_J,
                                   process_energy_J=ev.process_energy_J,
                                   storage_used_bytes=ev.storage_used_bytes)
            value += sum(task_value(t) for t in tasks if t.id in set(ordered))
            dist += ev.distance_m
        if not feasible:
            continue
        obj = value - learn.move_energy_scale * dist
        assigned = {tid for r in routes.values() for tid in r.stops}
        cand = Assignment(routes=routes, unassigned={t.id for t in tasks} - assigned)
        key = _encode(cand)
        if obj > best_obj + 1e-12 or (abs(obj - best_obj) <= 1e-12 and key < best_key):
            best_obj, best, best_key = obj, cand, key
    return best


def _encode(assignment: Assignment) -> tuple:
    return tuple((u, tuple(assignment.routes[u].stops)) for u in sorted(assignment.routes))


def cheapest_insertion(uav_id: int, stops: list, task_id: int, scenario: Scenario):
    """Best position to insert a task into an existing stop list.

    Returns (new_stops, added_curved_distance); distance delta is measured on
    the full route including depot legs.
    """
    base = evaluate_route(uav_id, stops, scenario).distance_m if stops else \
        evaluate_route(uav_id, [], scenario).distance_m
    best = None
    for pos in range(len(stops) + 1):
        cand = stops[:pos] + [task_id] + stops[pos:]
        d = evaluate_route(uav_id, cand, scenario).distance_m
        if best is None or d - base < best[1] - 1e-15:
            best = (cand, d - base)
    return best
