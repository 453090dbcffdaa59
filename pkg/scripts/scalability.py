#!/usr/bin/env python3
"""Wall-clock and channel-load scaling versus vehicle count."""

import argparse
import sys
import time

from taoi_sim.engine import SimConfig, run_simulation


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.strip())
    ap.add_argument("--counts", default="30,60,90,120,150")
    ap.add_argument("--duration", type=float, default=20.0)
    ap.add_argument("--protocol", default="taoi")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    print(f"{'n':>4}  {'wall_s':>7}  {'risk':>6}  {'pdr':>6}  "
          f"{'aoi_ms':>8}  {'neg_gaps':>8}")
    for n in (int(c) for c in args.counts.split(",")):
        cfg = SimConfig(vehicle_count=n, duration_s=args.duration,
                        protocol=args.protocol, seed=args.seed)
        t0 = time.perf_counter()
        rep = run_simulation(cfg)
        wall = time.perf_counter() - t0
        pdr = rep.overall_pdr if rep.overall_pdr is not None else float("nan")
        print(f"{n:>4}  {wall:>7.2f}  {rep.collision_risk_count:>6}  "
              f"{pdr:>6.3f}  {rep.system_aoi_s * 1000.0:>8.2f}  "
              f"{rep.negative_gap_events:>8}")
        if rep.negative_gap_events:
            print("warning: mobility produced overlapping vehicles",
                  file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
