"""Non-learning allocators: random, greedy insertion, and a genetic solver.

All return routing.Assignment objects that pass routing.check_feasible, so they
can be scored with routing.objective or rolled out in the environment for
like-for-like comparison with the learned policies.
"""

from __future__ import annotations

import numpy as np

from . import routing
from .scenario import Scenario, task_value


def route_feasible(uav_id: int, stops: list, scenario: Scenario) -> bool:
    uav = scenario.uavs[uav_id]
    ev = routing.evaluate_route(uav_id, stops, scenario)
    return routing._route_eval_feasible(ev, uav, scenario)


def order_stops(uav_id: int, stops: list, scenario: Scenario) -> list:
    """Short stop lists get the shortest feasible order (falling back to the
    minimum-distance order when none is feasible), long ones nearest neighbour
    under the curved metric."""
    if len(stops) <= 6:
        found = routing.best_feasible_order(uav_id, stops, scenario)
        if found is not None:
            return found[0]
        ordered, _ = routing.best_route_order(uav_id, stops, scenario)
        return ordered
    tasks = {t.id: t for t in scenario.tasks}
    uav = scenario.uavs[uav_id]
    depot = scenario.region.station_positions[uav.home_station]
    remaining = sorted(stops)
    out = []
    pos = (depot[0], depot[1])
    prev = None
    while remaining:
        if prev is None:
            nxt = min(remaining,
                      key=lambda tid: (routing.euclidean_xy(pos, tasks[tid].position), tid))
        else:
            nxt = min(remaining,
                      key=lambda tid: (routing.curved_distance(tasks[prev], tasks[tid],
                                                               scenario.compute), tid))
        out.append(nxt)
        remaining.remove(nxt)
        prev = nxt
    return out


def _assignment_from_stops(per_uav: dict, scenario: Scenario) -> routing.Assignment:
    routes = {}
    for uav_id, u in enumerate(scenario.uavs):
        stops = per_uav.get(uav_id, [])
        routes[uav_id] = routing.build_route(uav_id, stops, scenario) if stops else \
            routing.Route(uav_id=uav_id, depot=u.home_station)
    assigned = {tid for s in per_uav.values() for tid in s}
    return routing.Assignment(routes=routes,
                              unassigned={t.id for t in scenario.tasks} - assigned)


# ---------------------------------------------------------------------------
# random

def rnd_allocate(scenario: Scenario, seed: int = 0) -> routing.Assignment:
    """Assign tasks in random order to random UAVs, keeping only feasible inserts."""
    rng = np.random.default_rng(seed)
    per_uav: dict[int, list] = {}
    order = rng.permutation(len(scenario.tasks))
    for idx in order:
        tid = scenario.tasks[idx].id
        for uav_id in rng.permutation(len(scenario.uavs)):
            uav_id = int(uav_id)
            stops, _ = routing.cheapest_insertion(uav_id, per_uav.get(uav_id, []),
                                                 tid, scenario)
            if route_feasible(uav_id, stops, scenario):
                per_uav[uav_id] = stops
                break
    return _assignment_from_stops(per_uav, scenario)


# ---------------------------------------------------------------------------
# greedy

def greedy_allocate(scenario: Scenario) -> routing.Assignment:
    """Highest-value tasks first, each to its cheapest feasible insertion."""
    per_uav: dict[int, list] = {}
    order = sorted(scenario.tasks, key=lambda t: (-task_value(t), t.id))
    for task in order:
        best = None
        for uav_id in range(len(scenario.uavs)):
            stops, delta = routing.cheapest_insertion(uav_id, per_uav.get(uav_id, []),
                                                      task.id, scenario)
            if route_feasible(uav_id, stops, scenario):
                if best is None or delta < best[0] - 1e-12:
                    best = (delta, uav_id, stops)
        if best is not None:
            per_uav[best[1]] = best[2]
    return _assignment_from_stops(per_uav, scenario)


# ---------------------------------------------------------------------------
# genetic

def _repair(per_uav: dict, scenario: Scenario) -> dict:
    """Drop lowest-value stops from any route that violates its budgets."""
    tasks = {t.id: t for t in scenario.tasks}
    out = {}
    for uav_id, stops in per_uav.items():
        stops = order_stops(uav_id, list(stops), scenario)
        while stops and not route_feasible(uav_id, stops, scenario):
            victim = min(stops, key=lambda tid: (task_value(tasks[tid]), -tid))
            stops = [s for s in stops if s != victim]
        if stops:
            out[uav_id] = stops
    return out


def _fitness(owners, scenario: Scenario) -> tuple:
    per_uav: dict[int, list] = {}
    for tid, owner in enumerate(owners):
        if owner >= 0:
            per_uav.setdefault(int(owner), []).append(tid)
    per_uav = _repair(per_uav, scenario)
    tasks = {t.id: t for t in scenario.tasks}
    value = sum(task_value(tasks[tid]) for s in per_uav.values() for tid in s)
    dist = sum(routing.evaluate_route(u, s, scenario).distance_m
               for u, s in per_uav.items())
    return value - scenario.learn.move_energy_scale * dist, per_uav


def ga_allocate(scenario: Scenario, seed: int = 0, population: int = 50,
                generations: int = 200, crossover_rate: float = 0.8,
                mutation_rate: float = 0.05, elitism: int = 2) -> routing.Assignment:
    """Owner-vector genetic search with tournament selection and repair."""
    rng = np.random.default_rng(seed)
    n = len(scenario.tasks)
    n_uavs = len(scenario.uavs)
    if n == 0:
        return routing.empty_assignment(scenario)
    pop = rng.integers(-1, n_uavs, size=(population, n))
    fits = np.array([_fitness(ind, scenario)[0] for ind in pop])
    for _ in range(generations):
        nxt = []
        elite_idx = np.argsort(-fits)[:elitism]
        nxt.extend(pop[i].copy() for i in elite_idx)
        while len(nxt) < population:
            a = _tournament(pop, fits, rng)
            b = _tournament(pop, fits, rng)
            child = a.copy()
            if rng.random() < crossover_rate:
                take_b = rng.random(n) < 0.5
                child[take_b] = b[take_b]
            mutate = rng.random(n) < mutation_rate
            child[mutate] = rng.integers(-1, n_uavs, size=int(mutate.sum()))
            nxt.append(child)
        pop = np.stack(nxt)
        fits = np.array([_fitness(ind, scenario)[0] for ind in pop])
    best = pop[int(np.argmax(fits))]
    _, per_uav = _fitness(best, scenario)
    return _assignment_from_stops(per_uav, scenario)


def _tournament(pop, fits, rng, k: int = 3):
    idx = rng.integers(len(pop), size=k)
    return pop[idx[np.argmax(fits[idx])]]
