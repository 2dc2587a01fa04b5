"""Experiment harness: end-to-end runs, metrics, and plot-ready CSV emission.

A run is (method, scenario config, seed) -> metrics dict plus artifacts in an
output directory: manifest.json, metrics.csv, learning_curve.csv for learned
methods, trajectory.jsonl for the final evaluation episode.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import time
from dataclasses import asdict, replace

import numpy as np

from . import baselines, coordination, routing, sac
from .env import Env, rollout_assignment
from .scenario import Scenario, ScenarioConfig, generate_scenario, task_value

METHODS = ("sac", "sac-no-sharing", "sac-centralized", "rnd", "ga", "greedy")

# run profiles trade fidelity for wall time
PROFILES = {
    "desk": {
        "config": dict(n_tasks=30, n_uavs=4, n_stations=2),
        "episodes": 40, "ga_generations": 40, "ga_population": 30,
        "update_every": 2, "hidden": (64, 64),
    },
    "paper": {
        "config": dict(n_tasks=110, n_uavs=16, n_stations=4),
        "episodes": 300, "ga_generations": 200, "ga_population": 50,
        "update_every": 1, "hidden": (128, 128),
    },
}


def profile_config(profile: str, **overrides) -> ScenarioConfig:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile '{profile}'; choose from {sorted(PROFILES)}")
    base = dict(PROFILES[profile]["config"])
    base.update(overrides)
    return ScenarioConfig(**base)


# ---------------------------------------------------------------------------
# metrics

def compute_metrics(env: Env) -> dict:
    sc = env.scenario
    tasks = sc.tasks
    collected = [t for t in tasks if t.collected_by is not None]
    value = sum(task_value(t) for t in collected)
    betas = [t.processed_fraction for t in collected]
    energy = sum(u.energy_spent_J for u in env.uav_states)
    proc_energy = sum(spec.battery_process_J - u.process_battery_J
                      for u, spec in zip(env.uav_states, sc.uavs))
    return_times = [u.return_time_s for u in env.uav_states if u.return_time_s]
    return {
        "n_tasks": len(tasks),
        "collected": len(collected),
        "collection_rate": len(collected) / len(tasks) if tasks else 1.0,
        "value_collected": value,
        "mean_beta": float(np.mean(betas)) if betas else 0.0,
        "duplicates": env.duplicate_collections,
        "flight_energy_J": energy,
        "process_energy_J": proc_energy,
        "mean_return_time_s": float(np.mean(return_times)) if return_times else 0.0,
        "steps": env.time_step,
    }


def global_eval_reward(env: Env) -> float:
    """Episode reward recomputed with the ground-truth collection rate.

    Training rewards weight each collection by the collecting agent's believed
    collection rate, which understates the score of methods with staler
    beliefs even when their task performance is identical. For cross-method
    comparison this metric replays the trajectory with the true rate.
    """
    sc = env.scenario
    prio = {t.id: t.priority for t in sc.tasks}
    n = len(sc.tasks)
    learn = sc.learn
    total, done_cnt = 0.0, 0
    for rec in env.trajectory:
        fresh = [c for c in rec["collections"] if not c.get("duplicate")]
        done_cnt += len(fresh)
        ct = done_cnt / n if n else 1.0
        for c in fresh:
            total += ct * (
                learn.reward_mu * (math.exp(learn.reward_omega * c["beta"]) - 1.0)
                / 3.0 * prio[c["task"]]
                - learn.reward_epsilon * c["process_energy_J"]
            ) * learn.reward_phi
    return total


def assignment_metrics(assignment: routing.Assignment, scenario: Scenario) -> dict:
    return {
        "objective": routing.objective(assignment, scenario),
        "assigned": len(assignment.assigned_tasks()),
        "unassigned": len(assignment.unassigned),
        "total_distance_m": sum(r.total_distance_m for r in assignment.routes.values()),
    }


# ---------------------------------------------------------------------------
# runs

def run_experiment(method: str, config: ScenarioConfig, seed: int,
                   out_dir: str | None = None, profile: str = "desk",
                   episodes: int | None = None) -> dict:
    """Execute one (method, config, seed) run and return its metrics row."""
    if method not in METHODS:
        raise ValueError(f"unknown method '{method}'; choose from {METHODS}")
    prof = PROFILES[profile]
    scenario = generate_scenario(config, seed)
    t0 = time.time()
    history = None

    if method in ("rnd", "ga", "greedy"):
        if method == "rnd":
            assignment = baselines.rnd_allocate(scenario, seed=seed)
        elif method == "greedy":
            assignment = baselines.greedy_allocate(scenario)
        else:
            assignment = baselines.ga_allocate(
                scenario, seed=seed, population=prof["ga_population"],
                generations=prof["ga_generations"])
        env = rollout_assignment(scenario, assignment, seed=seed)
        metrics = compute_metrics(env)
        metrics.update(assignment_metrics(assignment, scenario))
        metrics["episode_reward_global"] = global_eval_reward(env)
    else:
        sharing = method != "sac-no-sharing"
        centralized = method == "sac-centralized"
        env = Env(scenario, sharing=sharing, centralized=centralized, seed=seed)
        n_ep = episodes if episodes is not None else prof["episodes"]
        agents, history = sac.train(env, episodes=n_ep, seed=seed,
                                    hidden=prof["hidden"],
                                    update_every=prof["update_every"])
        env.seed = seed
        eval_stats = sac.evaluate(env, agents, seed=seed, episodes=1)[0]
        metrics = compute_metrics(env)
        metrics["episode_return"] = sum(eval_stats.returns.values())
        metrics["episode_reward_global"] = global_eval_reward(env)

    metrics.update({"method": method, "seed": seed, "profile": profile,
                    "wall_time_s": time.time() - t0})
    if out_dir:
        _write_artifacts(out_dir, method, config, seed, metrics, env, history)
    return metrics


def _write_artifacts(out_dir, method, config, seed, metrics, env, history):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "method": method, "seed": seed,
        "config": _jsonable(asdict(config)),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), [metrics])
    with open(os.path.join(out_dir, "trajectory.jsonl"), "w") as fh:
        for rec in env.trajectory:
            fh.write(json.dumps(_jsonable(rec)) + "\n")
    if history is not None:
        emit_learning_curve(os.path.join(out_dir, "learning_curve.csv"), history)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return _jsonable(asdict(obj))
    return obj


# ---------------------------------------------------------------------------
# CSV emission (plot-ready)

def write_metrics_csv(path, rows: list):
    keys = sorted({k for row in rows for k in row})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def emit_learning_curve(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "return", "steps", "collected", "duplicates"])
        for ep, stats in enumerate(history):
            w.writerow([ep, sum(stats.returns.values()), stats.steps,
                        stats.collected, stats.duplicates])


def run_sweep(methods, config: ScenarioConfig, seeds, out_dir: str | None = None,
              profile: str = "desk", episodes: int | None = None) -> list:
    """Cross product of methods x seeds; one metrics row each."""
    rows = []
    for method in methods:
        for seed in seeds:
            sub = os.path.join(out_dir, f"{method}-s{seed}") if out_dir else None
            rows.append(run_experiment(method, config, seed, out_dir=sub,
                                       profile=profile, episodes=episodes))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics_csv(os.path.join(out_dir, "sweep.csv"), rows)
    return rows


# ---------------------------------------------------------------------------
# staleness diagnostics

def gap_analysis(i0: float, lam: float, t0_values, p: float, k: int,
                 path: str | None = None) -> list:
    """Worst-case and expected staleness gaps across sync intervals."""
    rows = []
    for t0 in t0_values:
        rows.append({
            "t0": t0,
            "worst_case_gap": coordination.worst_case_gap(i0, lam, t0),
            "expected_gap": coordination.expected_gap(i0, lam, t0, p, k),
        })
    if path:
        write_metrics_csv(path, rows)
    return rows


def audit_duplicates(config: ScenarioConfig, seed: int, d_thresholds,
                     path: str | None = None) -> list:
    """Duplicate-collection counts of the no-learning random policy as the
    proximity threshold varies (sharing-efficacy probe)."""
    rows = []
    for d in d_thresholds:
        cfg = replace(config, learn=replace(config.learn, d_threshold_m=d))
        scenario = generate_scenario(cfg, seed)
        env = Env(scenario, sharing=True, seed=seed)
        rng = np.random.default_rng(seed)
        while not env.done:
            actions = {}
            for g in env.agents:
                masks = env.action_mask(g)
                acts = []
                for u in env.agent_uavs(g):
                    valid = np.flatnonzero(masks[u])
                    acts.append(int(rng.choice(valid)))
                actions[g] = acts
            env.step(actions)
        rows.append({"d_threshold_m": d,
                     "duplicates": env.duplicate_collections,
                     "collected": sum(1 for t in scenario.tasks
                                      if t.collected_by is not None)})
    if path:
        write_metrics_csv(path, rows)
    return rows
