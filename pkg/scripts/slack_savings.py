"""Work saved by slack filtering over basic insertion, per constraint level.

Counts node constraint re-checks and times insertions (best of five,
interleaved) on random vehicle states with at least three pending trips.

  python3 scripts/slack_savings.py --instances 300
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

from ridetree.instances import InstanceConfig, random_instance
from ridetree.ktree import KineticTree, TreeStateError
from ridetree.roadnet import DistanceOracle, grid_network

LEVELS = [(3000, 0.1), (6000, 0.2), (12000, 0.4)]


def measure(d, n_vertices, rng, cfg, n):
    rows = []
    while len(rows) < n:
        inst = random_instance(d, n_vertices, rng, cfg)
        if len(inst.onboard) + len(inst.all_waiting) < 3:
            continue
        try:
            trees = {m: KineticTree.from_instance(d, inst.without_new(), mode=m) for m in ("basic", "slack")}
        except TreeStateError:
            continue
        best = {m: float("inf") for m in trees}
        evals = {}
        for rep in range(5):
            for m in ("basic", "slack") if rep % 2 else ("slack", "basic"):
                before = trees[m].stats.evaluations
                t0 = time.perf_counter()
                trees[m].insert_waiting(inst.new_trip)
                best[m] = min(best[m], time.perf_counter() - t0)
                evals[m] = trees[m].stats.evaluations - before
        rows.append((evals["basic"], evals["slack"], best["basic"], best["slack"]))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=300)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)
    net = grid_network(20, 20, weight=100)
    d = DistanceOracle(net)
    print("wait_s,detour,fewer_share,evals_basic,evals_slack,median_us_basic,median_us_slack")
    for wait, detour in LEVELS:
        rng = random.Random(args.seed)
        cfg = InstanceConfig(max_onboard=3, max_waiting=3, max_wait=wait, detour=detour,
                             slack_range=(0, wait // 10), max_waypoints=9)
        rows = measure(d, net.vertex_count, rng, cfg, args.instances)
        fewer = sum(s < b for b, s, _, _ in rows) / len(rows)
        eb = sum(r[0] for r in rows)
        es = sum(r[1] for r in rows)
        tb = statistics.median(r[2] for r in rows) * 1e6
        ts = statistics.median(r[3] for r in rows) * 1e6
        print(f"{wait // 10},{detour},{fewer:.3f},{eb},{es},{tb:.1f},{ts:.1f}")


if __name__ == "__main__":
    main()
