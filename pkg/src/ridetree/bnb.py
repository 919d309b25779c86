"""Best-first branch-and-bound over partial schedules.

The bound of a partial schedule is its cost so far plus, for every point not
yet placed, the cheapest edge incident to that point in the complete graph
on the instance's points and the start vertex.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .bruteforce import Scheduled, SearchStats, _Problem
from .roadnet import INF
from .trips import Distance, ReschedulingInstance


@dataclass(order=True)
class PartialScheduleNode:
    bound: int | float
    neg_depth: int
    keys: tuple = field(repr=False)
    sequence: tuple[int, ...] = field(compare=False)
    cost: int = field(compare=False)
    state: tuple = field(compare=False, repr=False)
    remaining: frozenset[int] = field(compare=False)


class BranchAndBound:
    """Search context for one instance; holds the minimum incident edges."""

    def __init__(self, dist: Distance, inst: ReschedulingInstance):
        self.prob = _Problem(dist, inst)
        d = self.prob.d
        n = len(d)
        self.min_edge = [0] + [
            min((d[i][j] for j in range(n) if j != i), default=0) for i in range(1, n)
        ]

    def lower_bound(self, cost: int | float, remaining) -> int | float:
        return cost + sum(self.min_edge[j] for j in remaining)

    def root(self) -> PartialScheduleNode:
        rem = frozenset(range(1, len(self.prob.points) + 1))
        return PartialScheduleNode(self.lower_bound(0, rem), 0, (), (), 0, self.prob.start_state(), rem)

    def solve(self, stats: SearchStats | None = None, trace: list | None = None) -> Scheduled | None:
        """Run the search; ``trace`` collects every node popped for expansion."""
        stats = stats if stats is not None else SearchStats()
        prob = self.prob
        keyof = [None] + [p.key for p in prob.points]
        best_cost: int | float = INF
        best_seq: tuple[int, ...] | None = None
        heap = [self.root()]
        while heap:
            node = heapq.heappop(heap)
            if node.bound > best_cost:
                break
            if not node.remaining:
                # only the empty instance reaches here without children
                if node.cost < best_cost:
                    best_cost, best_seq = node.cost, node.sequence
                continue
            stats.expanded += 1
            if trace is not None:
                trace.append(node)
            for j in sorted(node.remaining):
                stats.generated += 1
                nxt = prob.step(node.state, j)
                if nxt is None:
                    continue
                seq = node.sequence + (j,)
                rem = node.remaining - {j}
                cost = nxt[1]
                if not rem:
                    stats.complete += 1
                    if cost < best_cost or (
                        cost == best_cost and [keyof[i] for i in seq] < [keyof[i] for i in best_seq]
                    ):
                        best_cost, best_seq = cost, seq
                    continue
                bound = self.lower_bound(cost, rem)
                if bound > best_cost:
                    continue
                heapq.heappush(
                    heap,
                    PartialScheduleNode(
                        bound, -len(seq), node.keys + (keyof[j],), seq, cost, nxt, rem
                    ),
                )
        if best_seq is None:
            return None
        return Scheduled(tuple(prob.points[j - 1] for j in best_seq), best_cost)


def lower_bound(dist: Distance, inst: ReschedulingInstance, node: PartialScheduleNode) -> int | float:
    return BranchAndBound(dist, inst).lower_bound(node.cost, node.remaining)


def best_schedule_bnb(
    dist: Distance,
    inst: ReschedulingInstance,
    stats: SearchStats | None = None,
    trace: list | None = None,
) -> Scheduled | None:
    return BranchAndBound(dist, inst).solve(stats, trace)
