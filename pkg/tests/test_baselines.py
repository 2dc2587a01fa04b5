import numpy as np
import pytest

from uavfleet import baselines, routing
from uavfleet.scenario import ScenarioConfig, generate_scenario


def test_rnd_allocation_feasible(desk_scenario):
    a = baselines.rnd_allocate(desk_scenario, seed=0)
    assert routing.check_feasible(a, desk_scenario).feasible
    assigned = a.assigned_tasks()
    assert len(assigned) == len(set(assigned))


def test_rnd_seed_determinism(desk_scenario):
    a = baselines.rnd_allocate(desk_scenario, seed=5)
    b = baselines.rnd_allocate(desk_scenario, seed=5)
    assert a.to_dict() == b.to_dict()
    c = baselines.rnd_allocate(desk_scenario, seed=6)
    assert a.to_dict() != c.to_dict()


def test_greedy_allocation_feasible_and_deterministic(desk_scenario):
    a = baselines.greedy_allocate(desk_scenario)
    b = baselines.greedy_allocate(desk_scenario)
    assert a.to_dict() == b.to_dict()
    assert routing.check_feasible(a, desk_scenario).feasible
    # greedy should do no worse than random on its own objective
    r = baselines.rnd_allocate(desk_scenario, seed=0)
    assert routing.objective(a, desk_scenario) >= routing.objective(r, desk_scenario) - 1e-9


def test_ga_allocation_feasible(small_scenario):
    a = baselines.ga_allocate(small_scenario, seed=0, population=16,
                              generations=10)
    assert routing.check_feasible(a, small_scenario).feasible


def test_ga_not_worse_than_random_median():
    cfg = ScenarioConfig(n_tasks=8, n_uavs=2, n_stations=2)
    diffs = []
    for seed in range(5):
        sc = generate_scenario(cfg, seed)
        ga = baselines.ga_allocate(sc, seed=seed, population=20, generations=15)
        rnd = baselines.rnd_allocate(sc, seed=seed)
        diffs.append(routing.objective(ga, sc) - routing.objective(rnd, sc))
    assert np.median(diffs) >= -1e-9


def test_order_stops_exact_small(small_scenario):
    ids = [t.id for t in small_scenario.tasks[:4]]
    ordered = baselines.order_stops(0, ids, small_scenario)
    expect, _ = routing.best_route_order(0, ids, small_scenario)
    assert ordered == expect


def test_order_stops_nearest_neighbour_large(desk_scenario):
    ids = [t.id for t in desk_scenario.tasks[:9]]
    ordered = baselines.order_stops(0, ids, desk_scenario)
    assert sorted(ordered) == sorted(ids)


def test_repair_drops_low_value_until_feasible(desk_scenario):
    all_ids = [t.id for t in desk_scenario.tasks]
    per_uav = baselines._repair({0: all_ids}, desk_scenario)
    if 0 in per_uav:
        assert baselines.route_feasible(0, per_uav[0], desk_scenario)
        assert len(per_uav[0]) < len(all_ids)
