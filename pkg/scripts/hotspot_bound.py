"""Hotspot cost bound check on clustered instances.

Builds each vehicle's tree by inserting its trips one at a time in hotspot
mode, then compares the selected route against the brute-force optimum.

  python3 scripts/hotspot_bound.py --instances 500 --family separated
"""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass

from ridetree.bruteforce import best_schedule_bf
from ridetree.ktree import KineticTree
from ridetree.roadnet import DistanceOracle, grid_network
from ridetree.trips import Kind, OnboardTrip, ReschedulingInstance, WaitingTrip

GRID = 20
BLOCK = 100  # deciseconds per grid edge


@dataclass
class Outcome:
    theta: int
    hotspot: int | None
    optimum: int | None
    m: int
    eligible: bool

    @property
    def bound(self) -> int:
        return self.optimum + 2 * (self.m + 1) * self.theta

    @property
    def violated(self) -> bool:
        if not self.eligible:
            return False
        return self.hotspot is None or self.hotspot > self.bound


def cluster(d, n, hub, radius):
    """Vertices within ``radius`` of ``hub``; pairwise at most twice that."""
    return [v for v in range(n) if d(hub, v) <= radius]


def make_instance(d, n, rng, theta, family):
    """Pickups near one hub and dropoffs near a distant one (``separated``),
    or every point drawn from two nearby hubs (``mixed``)."""
    a = rng.randrange(n)
    far = [v for v in range(n) if d(a, v) >= 12 * BLOCK]
    b = rng.choice(far)
    if family == "mixed":
        b = rng.choice([v for v in range(n) if 0 < d(a, v) <= 3 * BLOCK])
    near_a = cluster(d, n, a, theta // 2)
    near_b = cluster(d, n, b, theta // 2)
    both = near_a + near_b
    start = rng.randrange(n)
    k = rng.randint(0, 2)
    m = rng.randint(1, min(3, (9 - k - 2) // 2))
    loose = 4000 + 10 * theta

    def pick(pool):
        return rng.choice(pool)

    tid = 0
    onboard = []
    for _ in range(k):
        tid += 1
        e = pick(near_b if family == "separated" else both)
        onboard.append(OnboardTrip(tid, e, d(start, e) + loose + rng.randint(0, 2000)))
    waiting = []
    for _ in range(m + 1):
        tid += 1
        if family == "separated":
            s, e = pick(near_a), pick(near_b)
        else:
            s, e = pick(both), pick(both)
            while e == s:
                e = pick(both + [b])
        direct = d(s, e)
        waiting.append(WaitingTrip(tid, s, e, d(start, s) + loose + rng.randint(0, 2000), direct + loose))
    return ReschedulingInstance(start, tuple(onboard), tuple(waiting[:-1]), waiting[-1])


def slack_of(d, inst, seq):
    """Smallest residual budget over the points of ``seq``."""
    wait = {t.trip: t.wait_budget for t in inst.all_waiting}
    ride = {t.trip: t.ride_limit for t in inst.all_waiting}
    onboard = {t.trip: t.ride_budget for t in inst.onboard}
    cost, here, picked, low = 0, inst.start, {}, float("inf")
    for p in seq:
        cost += d(here, p.vertex)
        here = p.vertex
        if p.kind == Kind.PICKUP:
            low = min(low, wait[p.trip] - cost)
            picked[p.trip] = cost
        elif p.trip in onboard:
            low = min(low, onboard[p.trip] - cost)
        else:
            low = min(low, ride[p.trip] - (cost - picked[p.trip]))
    return low


def hotspot_route(d, inst, theta):
    """Insert trips one by one; return (cost, stops) of the selected route or None."""
    tree = KineticTree.from_instance(d, ReschedulingInstance(inst.start, inst.onboard), mode="hotspot", theta=theta)
    for w in inst.all_waiting:
        cand = tree.insert_waiting(w)
        if cand is None:
            return None
        tree.commit(cand)
    return tree.cost, tree.route_stops()


def evaluate(d, inst, theta) -> Outcome:
    best = best_schedule_bf(d, inst)
    got = hotspot_route(d, inst, theta)
    m = max((len(s) for s in got[1]), default=1) if got else 1
    if best is None:
        return Outcome(theta, got and got[0], None, m, False)
    eligible = slack_of(d, inst, best.sequence) > m * theta
    return Outcome(theta, got[0] if got else None, best.cost, m, eligible)


def sweep(n, seed, thetas, family):
    net = grid_network(GRID, GRID, weight=BLOCK)
    d = DistanceOracle(net)
    rng = random.Random(seed)
    out = []
    for theta in thetas:
        count = 0
        while count < n:
            inst = make_instance(d, net.vertex_count, rng, theta, family)
            o = evaluate(d, inst, theta)
            if o.eligible:
                count += 1
                out.append(o)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=500, help="eligible instances per theta")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--family", choices=("separated", "mixed"), default="separated")
    args = ap.parse_args()
    res = sweep(args.instances, args.seed, (0, 300, 600), args.family)
    for theta in (0, 300, 600):
        rows = [o for o in res if o.theta == theta]
        bad = sum(o.violated for o in rows)
        merged = sum(o.m > 1 for o in rows)
        worst = max((o.hotspot - o.optimum) for o in rows if o.hotspot is not None)
        print(f"theta={theta / 10:.0f}s instances={len(rows)} merged={merged} worst_gap_ds={worst} violations={bad}")


if __name__ == "__main__":
    main()
