"""Command-line entry points for scenario generation and experiments."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import harness
from .scenario import ScenarioConfig, generate_scenario, load_config, save_scenario


def _out_dir(args) -> str:
    return args.out or os.environ.get("UAVFLEET_OUT", "out")


def _load_base_config(args) -> ScenarioConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = harness.profile_config(args.profile)
    learn = cfg.learn
    if getattr(args, "tasks", None):
        cfg = replace(cfg, n_tasks=args.tasks)
    if getattr(args, "t0", None):
        learn = replace(learn, t0_sync=args.t0)
    if getattr(args, "d_threshold", None) is not None:
        learn = replace(learn, d_threshold_m=args.d_threshold)
    if learn is not cfg.learn:
        cfg = replace(cfg, learn=learn)
    return cfg


def _add_common(p):
    p.add_argument("--config", help="strict JSON scenario config file")
    p.add_argument("--profile", default="desk", choices=sorted(harness.PROFILES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tasks", type=int, help="override task count")
    p.add_argument("--t0", type=int, help="override periodic sync interval")
    p.add_argument("--d-threshold", type=float, help="override proximity threshold (m)")
    p.add_argument("--out", help="output directory (default $UAVFLEET_OUT or ./out)")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="uavfleet",
                                 description="multi-UAV task collection experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate-scenario", help="write a scenario JSON for replay")
    _add_common(p)

    p = sub.add_parser("train", help="train the learned allocator")
    _add_common(p)
    p.add_argument("--method", default="sac",
                   choices=["sac", "sac-no-sharing", "sac-centralized"])
    p.add_argument("--no-sharing", action="store_true",
                   help="shorthand for --method sac-no-sharing")
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("evaluate", help="run a non-learning allocator")
    _add_common(p)
    p.add_argument("--method", default="greedy", choices=["rnd", "ga", "greedy"])

    p = sub.add_parser("sweep", help="methods x seeds cross product")
    _add_common(p)
    p.add_argument("--methods", default="greedy,rnd",
                   help="comma-separated subset of " + ",".join(harness.METHODS))
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("gap-analysis", help="staleness gap diagnostics")
    _add_common(p)
    p.add_argument("--i0", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.05)
    p.add_argument("--t0-values", default="1,2,5,10,20,50")
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--stations", type=int, default=4)

    p = sub.add_parser("audit-duplicates", help="duplicate collections vs proximity threshold")
    _add_common(p)
    p.add_argument("--d-thresholds", default="0,100,200,500,1500")

    args = ap.parse_args(argv)
    out = _out_dir(args)

    if args.cmd == "generate-scenario":
        cfg = _load_base_config(args)
        scenario = generate_scenario(cfg, args.seed)
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, f"scenario-s{args.seed}.json")
        save_scenario(scenario, path)
        print(path)
        return 0

    if args.cmd in ("train", "evaluate"):
        cfg = _load_base_config(args)
        method = args.method
        if args.cmd == "train" and getattr(args, "no_sharing", False):
            method = "sac-no-sharing"
        metrics = harness.run_experiment(
            method, cfg, args.seed, out_dir=os.path.join(out, f"{method}-s{args.seed}"),
            profile=args.profile, episodes=getattr(args, "episodes", None))
        json.dump(metrics, sys.stdout, indent=1, default=float)
        print()
        return 0

    if args.cmd == "sweep":
        cfg = _load_base_config(args)
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        seeds = [int(s) for s in args.seeds.split(",")]
        rows = harness.run_sweep(methods, cfg, seeds, out_dir=out,
                                 profile=args.profile, episodes=args.episodes)
        print(os.path.join(out, "sweep.csv"), f"({len(rows)} rows)")
        return 0

    if args.cmd == "gap-analysis":
        os.makedirs(out, exist_ok=True)
        t0s = [int(x) for x in args.t0_values.split(",")]
        path = os.path.join(out, "gap_analysis.csv")
        harness.gap_analysis(args.i0, args.lam, t0s, args.p, args.stations, path=path)
        print(path)
        return 0

    if args.cmd == "audit-duplicates":
        cfg = _load_base_config(args)
        os.makedirs(out, exist_ok=True)
        ds = [float(x) for x in args.d_thresholds.split(",")]
        path = os.path.join(out, "duplicates.csv")
        harness.audit_duplicates(cfg, args.seed, ds, path=path)
        print(path)
        return 0

    return 1


if __name__ == "__main__":
    raise SystemExit(main())
