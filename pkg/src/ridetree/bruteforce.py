"""Exhaustive scheduler: the ground truth every other scheduler is checked against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .roadnet import INF
from .trips import Budgets, Distance, Kind, ReschedulingInstance, Waypoint

MAX_WAYPOINTS = 10


class InstanceTooLarge(ValueError):
    pass


class Scheduled(NamedTuple):
    sequence: tuple[Waypoint, ...]
    cost: int


@dataclass
class SearchStats:
    expanded: int = 0  # partial schedules extended
    generated: int = 0  # children created (valid or not)
    complete: int = 0  # full valid schedules reached


class _Problem:
    """Waypoints of an instance with their pairwise distance matrix.

    Index 0 is the start vertex; points follow in sorted ``(kind, trip)``
    order so depth-first enumeration visits sequences lexicographically.
    """

    def __init__(self, dist: Distance, inst: ReschedulingInstance):
        self.inst = inst
        self.points = inst.waypoints()
        verts = [inst.start] + [p.vertex for p in self.points]
        self.d = [[dist(a, b) for b in verts] for a in verts]
        self.budgets = Budgets.of(inst)
        idx = {(p.kind, p.trip): i + 1 for i, p in enumerate(self.points)}
        # for each dropoff, index of the pickup it must follow (0 when onboard)
        self.needs = [0] * (len(self.points) + 1)
        for i, p in enumerate(self.points, start=1):
            if p.kind == Kind.DROPOFF:
                self.needs[i] = idx.get((Kind.PICKUP, p.trip), 0)

    def step(self, state, j):
        """Extend a partial state by point ``j``; ``None`` if a rule breaks."""
        here, cost, load, picked = state
        p = self.points[j - 1]
        c = cost + self.d[here][j]
        if c == INF:
            return None
        b = self.budgets
        if p.kind == Kind.PICKUP:
            if c > b.wait[p.trip] or (b.capacity is not None and load + 1 > b.capacity):
                return None
            return (j, c, load + 1, picked + ((p.trip, c),))
        need = self.needs[j]
        if need == 0:
            if c > b.onboard_ride[p.trip]:
                return None
        else:
            at = dict(picked).get(p.trip)
            if at is None or c - at > b.ride[p.trip]:
                return None
        return (j, c, load - 1, picked)

    def start_state(self):
        return (0, 0, self.budgets.load, ())


def _check_size(points) -> None:
    if len(points) > MAX_WAYPOINTS:
        raise InstanceTooLarge(f"{len(points)} waypoints exceeds brute-force cap of {MAX_WAYPOINTS}")


def enumerate_valid(dist: Distance, inst: ReschedulingInstance) -> list[Scheduled]:
    """Every valid ordering of the instance's points, in lexicographic order."""
    prob = _Problem(dist, inst)
    _check_size(prob.points)
    out: list[Scheduled] = []
    n = len(prob.points)

    def rec(state, used: int, seq: list[int]):
        if len(seq) == n:
            out.append(Scheduled(tuple(prob.points[j - 1] for j in seq), state[1]))
            return
        for j in range(1, n + 1):
            if used >> j & 1:
                continue
            nxt = prob.step(state, j)
            if nxt is not None:
                seq.append(j)
                rec(nxt, used | 1 << j, seq)
                seq.pop()

    rec(prob.start_state(), 0, [])
    return out


def best_schedule_bf(
    dist: Distance, inst: ReschedulingInstance, stats: SearchStats | None = None
) -> Scheduled | None:
    """Minimum-cost valid ordering by exhaustive enumeration.

    Prefixes that already break a budget are abandoned, which keeps the
    search exact. Among equal costs the lexicographically smallest
    ``(kind, trip)`` sequence wins.
    """
    prob = _Problem(dist, inst)
    _check_size(prob.points)
    stats = stats if stats is not None else SearchStats()
    n = len(prob.points)
    best_cost = INF
    best_seq: list[int] | None = None
    seq: list[int] = []

    def rec(state, used: int):
        nonlocal best_cost, best_seq
        if len(seq) == n:
            stats.complete += 1
            if state[1] < best_cost:
                best_cost, best_seq = state[1], list(seq)
            return
        stats.expanded += 1
        for j in range(1, n + 1):
            if used >> j & 1:
                continue
            stats.generated += 1
            nxt = prob.step(state, j)
            if nxt is not None:
                seq.append(j)
                rec(nxt, used | 1 << j)
                seq.pop()

    rec(prob.start_state(), 0)
    if best_seq is None:
        return None
    return Scheduled(tuple(prob.points[j - 1] for j in best_seq), best_cost)
