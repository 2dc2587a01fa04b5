#!/usr/bin/env python
"""Desk-scale comparison sweep: learned allocator variants vs classical baselines.

Writes per-run artifacts and an aggregate sweep.csv under --out.
"""

import argparse

from uavfleet import harness


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--profile", default="desk", choices=sorted(harness.PROFILES))
    ap.add_argument("--methods", default="greedy,rnd,ga,sac,sac-no-sharing")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--episodes", type=int, default=None)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    cfg = harness.profile_config(args.profile)
    methods = [m.strip() for m in args.methods.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = harness.run_sweep(methods, cfg, seeds, out_dir=args.out,
                             profile=args.profile, episodes=args.episodes)
    for row in rows:
        print(f"{row['method']:>16} seed={row['seed']} "
              f"cr={row['collection_rate']:.3f} dup={row['duplicates']} "
              f"value={row['value_collected']:.2f}")


if __name__ == "__main__":
    main()
