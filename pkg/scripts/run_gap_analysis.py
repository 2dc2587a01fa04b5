#!/usr/bin/env python
"""Staleness diagnostics: worst-case and expected information gaps vs sync interval."""

import argparse

from uavfleet import harness


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--i0", type=float, default=1.0)
    ap.add_argument("--lam", type=float, default=0.05)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--stations", type=int, default=4)
    ap.add_argument("--out", default="out/gap_analysis.csv")
    args = ap.parse_args()

    rows = harness.gap_analysis(args.i0, args.lam, [1, 2, 5, 10, 20, 50],
                                args.p, args.stations, path=args.out)
    for row in rows:
        print(f"t0={row['t0']:>3} worst={row['worst_case_gap']:.4f} "
              f"expected={row['expected_gap']:.4f}")


if __name__ == "__main__":
    main()
