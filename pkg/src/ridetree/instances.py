"""Random rescheduling instances for cross-checking schedulers."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .trips import Distance, OnboardTrip, ReschedulingInstance, WaitingTrip, ride_limit

INF_TRIPS = 1 << 30


@dataclass
class InstanceConfig:
    max_onboard: int = 2
    max_waiting: int = 2
    max_wait: int = 6000
    detour: float = 0.2
    capacity: int | None = None
    slack_range: tuple[int, int] = (0, 400)
    max_waypoints: int = 9
    max_trips: int | None = None  # onboard + waiting + new


def _pair(rng: random.Random, n: int) -> tuple[int, int]:
    s = rng.randrange(n)
    e = rng.randrange(n - 1)
    return s, e + (e >= s)


def random_instance(
    dist: Distance, n_vertices: int, rng: random.Random, cfg: InstanceConfig | None = None
) -> ReschedulingInstance:
    """A vehicle state plus one new trip.

    Onboard ride budgets and waiting budgets are set just above the direct
    distance from the start so that constraints are often tight but rarely
    impossible. The total waypoint count never exceeds ``cfg.max_waypoints``.
    """
    cfg = cfg or InstanceConfig()
    start = rng.randrange(n_vertices)
    lo, hi = cfg.slack_range
    budget = cfg.max_waypoints - 2
    trips = INF_TRIPS if cfg.max_trips is None else cfg.max_trips - 1
    k = rng.randint(0, min(cfg.max_onboard, budget, trips))
    if cfg.capacity is not None:
        k = min(k, cfg.capacity)
    budget -= k
    m = rng.randint(0, min(cfg.max_waiting, budget // 2, trips - k))
    tid = iter(range(1, 1000))

    onboard = []
    for _ in range(k):
        e = rng.randrange(n_vertices)
        onboard.append(OnboardTrip(next(tid), e, dist(start, e) + rng.randint(lo, hi)))
    waiting = []
    for _ in range(m):
        s, e = _pair(rng, n_vertices)
        wait = min(cfg.max_wait, dist(start, s) + rng.randint(lo, hi))
        waiting.append(WaitingTrip(next(tid), s, e, wait, ride_limit(dist(s, e), cfg.detour)))
    s, e = _pair(rng, n_vertices)
    new = WaitingTrip(next(tid), s, e, cfg.max_wait, ride_limit(dist(s, e), cfg.detour))
    return ReschedulingInstance(start, tuple(onboard), tuple(waiting), new, cfg.capacity)


def random_grid_pair(rows: int, cols: int, rng: random.Random) -> tuple[int, int]:
    return _pair(rng, rows * cols)
