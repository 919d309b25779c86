"""Kinetic tree: every valid unfinished schedule of one vehicle as a prefix tree.

The root is the vehicle's current vertex. Each node holds one waypoint, or
several when hotspot clustering merged nearby points into one stop. A node
keeps the travel cost from its parent (``entry``), the cost of walking its
own points (``internal``), the residual slack of its own constraints
(``own_slack``) and the subtree slack ``delta = min(own_slack, max child
delta)``.

Insertion builds a fresh candidate forest and never touches the current
tree, so losing a bid costs nothing. Budgets are root-relative: moving the
vehicle subtracts the travelled cost from every trip budget.

Slack filtering uses ``delta`` only to reject: a subtree whose new local
detour exceeds its ``delta`` has no valid path and is skipped without being
copied. For a dropoff whose pickup lies in the same path, the stored slack
is ``max(ride slack, pickup wait slack)``; a uniform delay inserted above
the pickup moves both points and leaves the ride unchanged, so the ride
slack alone would over-prune.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

from .roadnet import INF
from .trips import (
    Distance,
    Kind,
    OnboardTrip,
    ReschedulingInstance,
    TripRequest,
    WaitingTrip,
    Waypoint,
    sequence_key,
)

MODES = ("basic", "slack", "hotspot")
INVALIDATION = ("eager", "lazy")


class TreeCapacityError(RuntimeError):
    """Candidate construction exceeded the configured leaf budget."""


class TreeStateError(ValueError):
    pass


@dataclass(eq=False)
class TreeNode:
    points: tuple[Waypoint, ...]
    entry: int | float = 0
    internal: int | float = 0
    own_slack: int | float = INF
    children: list["TreeNode"] = field(default_factory=list)
    delta: int | float = INF

    @property
    def first(self) -> int:
        return self.points[0].vertex

    @property
    def last(self) -> int:
        return self.points[-1].vertex

    def __repr__(self) -> str:
        label = "+".join(str(p) for p in self.points)
        return f"TreeNode({label}, children={len(self.children)}, delta={self.delta})"


@dataclass
class TreeStats:
    evaluations: int = 0  # constraint re-checks of a node against new arrival times
    delta_rejections: int = 0  # O(1) slack comparisons that dropped a subtree unchecked
    nodes: int = 0
    leaves: int = 0
    merges: int = 0

    def add(self, other: "TreeStats") -> None:
        self.evaluations += other.evaluations
        self.delta_rejections += other.delta_rejections
        self.nodes += other.nodes
        self.leaves += other.leaves
        self.merges += other.merges


@dataclass
class _Ctx:
    """Root-relative budgets used while walking paths."""

    wait: dict[int, int | float]
    ride: dict[int, int | float]
    onboard_ride: dict[int, int | float]
    capacity: int | None


@dataclass
class Candidate:
    """An uncommitted insertion result; ``commit`` it on the tree that built it."""

    owner: "KineticTree"
    version: int
    children: list[TreeNode]
    onboard: dict[int, OnboardTrip]
    waiting: dict[int, WaitingTrip]
    cost: int
    route: tuple[Waypoint, ...]
    stats: TreeStats
    trip: int


class KineticTree:
    def __init__(
        self,
        dist: Distance,
        root: int,
        mode: str = "slack",
        invalidation: str = "lazy",
        capacity: int | None = None,
        theta: int = 0,
        leaf_limit: int = 100_000,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if invalidation not in INVALIDATION:
            raise ValueError(f"invalidation must be one of {INVALIDATION}")
        if theta < 0:
            raise ValueError("theta must be non-negative")
        self.dist = dist
        self.root = root
        self.mode = mode
        self.invalidation = invalidation
        self.capacity = capacity
        self.theta = theta
        self.leaf_limit = leaf_limit
        self.children: list[TreeNode] = []
        self.onboard: dict[int, OnboardTrip] = {}
        self.waiting: dict[int, WaitingTrip] = {}
        self.route: tuple[Waypoint, ...] = ()
        self.version = 0
        self.dirty = False
        self.stats = TreeStats()
        self._stats = self.stats
        self._theta = theta

    # -- construction --------------------------------------------------------

    @classmethod
    def from_instance(cls, dist: Distance, inst: ReschedulingInstance, **kwargs) -> "KineticTree":
        """Materialize every valid schedule of ``inst`` (its ``new_trip`` included)."""
        tree = cls(dist, inst.start, capacity=inst.capacity, **kwargs)
        tree.onboard = {t.trip: t for t in inst.onboard}
        tree.waiting = {t.trip: t for t in inst.all_waiting}
        ctx = tree._ctx()
        points = inst.waypoints()
        tree._stats = TreeStats()
        tree.children = tree._materialize(inst.start, 0, len(inst.onboard), {}, points, ctx)
        tree._stats = tree.stats
        if points and not tree.children:
            raise TreeStateError("instance has no valid schedule")
        tree._finish()
        return tree

    def _materialize(self, here, cost, load, picked, remaining, ctx) -> list[TreeNode]:
        out = []
        for i, p in enumerate(remaining):
            if p.kind == Kind.DROPOFF and p.trip in ctx.wait and p.trip not in picked:
                continue
            entry = self.dist(here, p.vertex)
            st = self._visit((p,), cost + entry, load, picked, ctx)
            if st is None:
                continue
            exit_cost, nload, npicked, slack = st
            rest = remaining[:i] + remaining[i + 1 :]
            node = TreeNode((p,), entry, 0, slack)
            if rest:
                node.children = self._materialize(p.vertex, exit_cost, nload, npicked, rest, ctx)
                if not node.children:
                    continue
            out.append(node)
        return out

    def _ctx(self, extra: WaitingTrip | None = None) -> _Ctx:
        wait = {t: w.wait_budget for t, w in self.waiting.items()}
        ride = {t: w.ride_limit for t, w in self.waiting.items()}
        if extra is not None:
            wait[extra.trip] = extra.wait_budget
            ride[extra.trip] = extra.ride_limit
        return _Ctx(wait, ride, {t: o.ride_budget for t, o in self.onboard.items()}, self.capacity)

    # -- per-node feasibility -------------------------------------------------

    def _visit(self, points, arrive, load, picked, ctx):
        """Walk ``points`` starting at cost ``arrive``; ``None`` if any rule breaks.

        Returns the exit cost, load, pickup costs and the node's own slack.
        """
        slack = INF
        cost = arrive
        prev = None
        for p in points:
            if prev is not None:
                cost += self.dist(prev, p.vertex)
            prev = p.vertex
            if cost == INF:
                return None
            t = p.trip
            if p.kind == Kind.PICKUP:
                s = ctx.wait[t] - cost
                if s < 0:
                    return None
                load += 1
                if ctx.capacity is not None and load > ctx.capacity:
                    return None
                picked = {**picked, t: cost}
            elif t in ctx.onboard_ride:
                s = ctx.onboard_ride[t] - cost
                if s < 0:
                    return None
                load -= 1
            else:
                at = picked.get(t)
                if at is None:
                    return None
                s = ctx.ride[t] - (cost - at)
                if s < 0:
                    return None
                s = max(s, ctx.wait[t] - at)
                load -= 1
            if s < slack:
                slack = s
        return cost, load, picked, slack

    def feasible(self, points, arrive, load, picked, ctx, detour=0, delta=INF):
        """Can ``points`` follow the current prefix when reached at ``arrive``?

        In slack and hotspot modes a local ``detour`` larger than the old
        subtree's ``delta`` rejects immediately.
        """
        if detour > delta and self.mode != "basic":
            self._stats.delta_rejections += 1
            return None
        self._stats.evaluations += 1
        return self._visit(points, arrive, load, picked, ctx)

    # -- insertion -----------------------------------------------------------

    def try_insert(self, trip: TripRequest, lead: int = 0) -> Candidate | None:
        """Build the tree of all valid schedules that also serve ``trip``.

        ``lead`` is travel the vehicle must finish before reaching the root
        vertex; it is charged against the new trip's waiting budget.
        """
        new = WaitingTrip.from_request(self.dist, trip, lead)
        return self._insert(new, self.theta if self.mode == "hotspot" else None)

    def insert_hotspot(self, trip: TripRequest, theta: int, lead: int = 0) -> Candidate | None:
        if theta < 0:
            raise ValueError("theta must be non-negative")
        new = WaitingTrip.from_request(self.dist, trip, lead)
        return self._insert(new, theta)

    def insert_waiting(self, new: WaitingTrip) -> Candidate | None:
        return self._insert(new, self.theta if self.mode == "hotspot" else None)

    def _insert(self, new: WaitingTrip, theta: int | None) -> Candidate | None:
        if new.trip in self.waiting or new.trip in self.onboard:
            raise TreeStateError(f"trip {new.trip} already in tree")
        if new.wait_budget < 0:
            return None
        stats = TreeStats()
        self._stats = stats
        self._theta = theta
        try:
            ctx = self._ctx(new)
            pending = (
                Waypoint(Kind.PICKUP, new.trip, new.pickup),
                Waypoint(Kind.DROPOFF, new.trip, new.dropoff),
            )
            forest = self._place(
                self.root, 0, len(self.onboard), {}, self.children, self.root, 0, pending, ctx, True
            )
        finally:
            self._stats = self.stats
            self.stats.add(stats)
        if not forest:
            return None
        cost, route = self._best(forest, self.root)
        waiting = dict(self.waiting)
        waiting[new.trip] = new
        return Candidate(self, self.version, forest, dict(self.onboard), waiting, cost, route, stats, new.trip)

    def _new_node(self, points, entry, internal, slack, children) -> TreeNode:
        st = self._stats
        st.nodes += 1
        if not children:
            st.leaves += 1
            if st.leaves > self.leaf_limit:
                raise TreeCapacityError(f"candidate tree exceeds {self.leaf_limit} leaves")
        return TreeNode(points, entry, internal, slack, children)

    def _place(self, pred, pred_cost, load, picked, forest, old, old_cost, pending, ctx, merge):
        """Interleave ``pending`` (in order) with the old subtrees in ``forest``.

        ``pred`` is the vertex the new forest hangs under, reached at
        ``pred_cost``; ``old`` is the exit vertex of the old forest's parent,
        whose new arrival cost is ``old_cost``. Their difference drives the
        local detour of each old child.
        """
        if not pending:
            return self._copy_forest(pred, pred_cost, load, picked, forest, old, old_cost, ctx)
        dist = self.dist
        p = pending[0]
        rest = pending[1:]

        if merge and self._theta is not None:
            target = self._merge_target(forest, p)
            if target is not None:
                merged = self._merge(pred, pred_cost, load, picked, forest, old, old_cost, target, pending, ctx)
                if merged:
                    return merged

        out: list[TreeNode] = []

        # p directly after pred
        entry = dist(pred, p.vertex)
        st = self.feasible((p,), pred_cost + entry, load, picked, ctx)
        if st is not None:
            exit_cost, nload, npicked, slack = st
            if rest:
                kids = self._place(p.vertex, exit_cost, nload, npicked, forest, old, old_cost, rest, ctx, True)
            else:
                kids = self._copy_forest(p.vertex, exit_cost, nload, npicked, forest, old, old_cost, ctx)
            if kids or (not forest and not rest):
                out.append(self._new_node((p,), entry, 0, slack, kids))

        # p somewhere below an old child
        new_trip = p.trip
        for c in forest:
            c_entry = c.entry if pred == old else dist(pred, c.first)
            arrive = pred_cost + c_entry
            detour = arrive - old_cost - c.entry
            c_exit = arrive + c.internal
            if p.kind == Kind.PICKUP:
                if c_exit > ctx.wait[new_trip]:
                    continue
            elif new_trip in picked and c_exit - picked[new_trip] > ctx.ride[new_trip]:
                continue
            st = self.feasible(c.points, arrive, load, picked, ctx, detour, c.delta)
            if st is None:
                continue
            exit_cost, nload, npicked, slack = st
            kids = self._place(c.last, exit_cost, nload, npicked, c.children, c.last, exit_cost, pending, ctx, False)
            if kids:
                out.append(self._new_node(c.points, c_entry, c.internal, slack, kids))
        return out

    def _copy_forest(self, pred, pred_cost, load, picked, forest, old, old_cost, ctx) -> list[TreeNode]:
        out = []
        for c in forest:
            node = self._copy(c, pred, pred_cost, load, picked, old, old_cost, ctx)
            if node is not None:
                out.append(node)
        return out

    def _copy(self, c, pred, pred_cost, load, picked, old, old_cost, ctx) -> TreeNode | None:
        c_entry = c.entry if pred == old else self.dist(pred, c.first)
        arrive = pred_cost + c_entry
        detour = arrive - old_cost - c.entry
        st = self.feasible(c.points, arrive, load, picked, ctx, detour, c.delta)
        if st is None:
            return None
        exit_cost, nload, npicked, slack = st
        kids = []
        if c.children:
            last = c.last
            for ch in c.children:
                node = self._copy(ch, last, exit_cost, nload, npicked, last, exit_cost, ctx)
                if node is not None:
                    kids.append(node)
            if not kids:
                return None
        return self._new_node(c.points, c_entry, c.internal, slack, kids)

    # -- hotspot clustering --------------------------------------------------

    def _within(self, points, p) -> bool:
        theta = self._theta
        return all(self.dist(q.vertex, p.vertex) <= theta for q in points)

    def _merge_target(self, forest, p) -> tuple[Waypoint, ...] | None:
        """First stop (preorder) within theta of ``p`` that every path of ``forest`` visits."""
        if not forest:
            return None
        common = _common_stops(forest)
        for node in _preorder(forest):
            if node.points in common and self._within(node.points, p):
                return node.points
        return None

    def _merge(self, pred, pred_cost, load, picked, forest, old, old_cost, target, pending, ctx):
        dist = self.dist
        p = pending[0]
        rest = pending[1:]
        out = []
        for c in forest:
            c_entry = c.entry if pred == old else dist(pred, c.first)
            arrive = pred_cost + c_entry
            detour = arrive - old_cost - c.entry
            if c.points != target:
                st = self.feasible(c.points, arrive, load, picked, ctx, detour, c.delta)
                if st is None or not c.children:
                    continue
                exit_cost, nload, npicked, slack = st
                kids = self._merge(c.last, exit_cost, nload, npicked, c.children, c.last, exit_cost, target, pending, ctx)
                if kids:
                    out.append(self._new_node(c.points, c_entry, c.internal, slack, kids))
                continue

            self._stats.merges += 1
            pts = c.points + (p,)
            internal = c.internal + dist(c.last, p.vertex)
            st = self.feasible(pts, arrive, load, picked, ctx, detour, c.delta)
            if st is None:
                continue
            exit_cost, nload, npicked, slack = st
            base_cost = arrive + c.internal
            node = None
            if rest:
                q = rest[0]
                if self._within(pts, q):
                    both = pts + (q,)
                    st2 = self.feasible(both, arrive, load, picked, ctx, detour, c.delta)
                    if st2 is not None:
                        e_cost, e_load, e_picked, e_slack = st2
                        kids = self._copy_forest(q.vertex, e_cost, e_load, e_picked, c.children, c.last, base_cost, ctx)
                        if kids or not c.children:
                            node = self._new_node(both, c_entry, internal + dist(p.vertex, q.vertex), e_slack, kids)
                if node is None:
                    kids = self._place(p.vertex, exit_cost, nload, npicked, c.children, c.last, base_cost, rest, ctx, True)
                    if kids:
                        node = self._new_node(pts, c_entry, internal, slack, kids)
            else:
                kids = self._copy_forest(p.vertex, exit_cost, nload, npicked, c.children, c.last, base_cost, ctx)
                if kids or not c.children:
                    node = self._new_node(pts, c_entry, internal, slack, kids)
            if node is not None:
                out.append(node)
        return out

    # -- commit and queries --------------------------------------------------

    def commit(self, candidate: Candidate) -> None:
        if candidate.owner is not self:
            raise TreeStateError("candidate was built by a different tree")
        if candidate.version != self.version:
            raise TreeStateError("tree changed since the candidate was built")
        self.children = candidate.children
        self.onboard = candidate.onboard
        self.waiting = candidate.waiting
        self.dirty = False
        self._finish()

    def _finish(self) -> None:
        for c in self.children:
            _update_delta(c)
        if self.children:
            self.route = self._best(self.children, self.root)[1]
        else:
            self.route = ()
        self.version += 1

    def _best(self, forest, start) -> tuple[int, tuple[Waypoint, ...]]:
        best = None
        for cost, seq in _leaf_paths(forest):
            key = (cost, sequence_key(seq))
            if best is None or key < best[0]:
                best = (key, seq)
        return best[0][0], best[1]

    @property
    def cost(self) -> int:
        """Cost of the selected route from the current root."""
        if not self.route:
            return 0
        cost, here = 0, self.root
        for p in self.route:
            cost += self.dist(here, p.vertex)
            here = p.vertex
        return cost

    def route_stops(self) -> list[tuple[Waypoint, ...]]:
        """Stops of the selected route; a hotspot stop holds several waypoints."""
        return _stops_along(self.children, self.route) or []

    def next_waypoint(self) -> Waypoint | None:
        return self.route[0] if self.route else None

    def schedules(self) -> list[tuple[tuple[Waypoint, ...], int]]:
        """All leaf schedules with their cost from the current root."""
        self._clean()
        if not self.children:
            return [((), 0)]
        return [(seq, cost) for cost, seq in _leaf_paths(self.children)]

    def leaf_count(self) -> int:
        return sum(1 for _ in _leaf_paths(self.children))

    def instance(self, new_trip: WaitingTrip | None = None) -> ReschedulingInstance:
        return ReschedulingInstance(
            self.root,
            tuple(self.onboard[t] for t in sorted(self.onboard)),
            tuple(self.waiting[t] for t in sorted(self.waiting)),
            new_trip,
            self.capacity,
        )

    @property
    def active_trips(self) -> int:
        return len(self.onboard) + len(self.waiting)

    # -- movement ------------------------------------------------------------

    def move(self, vertex: int, consumed: int) -> None:
        """The vehicle is now committed to ``vertex``, spending ``consumed`` on the way."""
        if consumed < 0:
            raise ValueError("consumed must be non-negative")
        self.root = vertex
        if consumed:
            self.onboard = {
                t: OnboardTrip(t, o.dropoff, o.ride_budget - consumed) for t, o in self.onboard.items()
            }
            self.waiting = {
                t: WaitingTrip(t, w.pickup, w.dropoff, w.wait_budget - consumed, w.ride_limit)
                for t, w in self.waiting.items()
            }
        for c in self.children:
            c.entry = self.dist(vertex, c.first)
        self.dirty = True
        if self.invalidation == "eager":
            self._clean()

    def advance(self, reached: Waypoint) -> None:
        """Record that the vehicle served ``reached``; schedules not starting with it are dropped."""
        if not self.route or self.route[0] != reached:
            raise TreeStateError(f"{reached} is not the next waypoint of the selected route")
        if self.root != reached.vertex:
            self.move(reached.vertex, self.dist(self.root, reached.vertex))
        head = next(c for c in self.children if c.points[0] == reached)
        if len(head.points) > 1:
            rest = head.points[1:]
            internal = head.internal - self.dist(head.first, rest[0].vertex)
            head = TreeNode(rest, self.dist(reached.vertex, rest[0].vertex), internal, head.own_slack, head.children, head.delta)
            self.children = [head]
        else:
            self.children = head.children
            for c in self.children:
                c.entry = self.dist(reached.vertex, c.first)
        t = reached.trip
        if reached.kind == Kind.PICKUP:
            w = self.waiting.pop(t)
            self.onboard[t] = OnboardTrip(t, w.dropoff, w.ride_limit)
        elif reached.kind == Kind.DROPOFF:
            self.onboard.pop(t)
        self.route = self.route[1:]
        self.version += 1
        if self.invalidation == "eager":
            self._clean()

    def _clean(self) -> None:
        """Drop schedules invalidated by movement and refresh slack values."""
        if not self.dirty:
            return
        ctx = self._ctx()
        saved = self._stats
        self._stats = TreeStats()
        try:
            self.children = self._revalidate(self.children, self.root, 0, len(self.onboard), {}, ctx)
        finally:
            self._stats = saved
        for c in self.children:
            _update_delta(c)
        self.dirty = False

    def _revalidate(self, forest, here, cost, load, picked, ctx) -> list[TreeNode]:
        out = []
        for c in forest:
            st = self._visit(c.points, cost + c.entry, load, picked, ctx)
            if st is None:
                continue
            exit_cost, nload, npicked, slack = st
            c.own_slack = slack
            if c.children:
                c.children = self._revalidate(c.children, c.last, exit_cost, nload, npicked, ctx)
                if not c.children:
                    continue
            out.append(c)
        return out

    # -- debug output --------------------------------------------------------

    def dump_text(self) -> str:
        lines = [f"root@{self.root}"]

        def rec(nodes, depth):
            for n in nodes:
                label = "+".join(str(p) for p in n.points)
                lines.append(f"{'  ' * depth}{label} [entry={n.entry} delta={n.delta}]")
                rec(n.children, depth + 1)

        rec(self.children, 1)
        return "\n".join(lines) + "\n"

    def dump_edges(self) -> str:
        ids = itertools.count(1)
        lines = ["digraph ktree {", f'  n0 [label="root@{self.root}"];']

        def rec(parent_id, nodes):
            for n in nodes:
                nid = next(ids)
                label = "+".join(str(p) for p in n.points)
                lines.append(f'  n{nid} [label="{label}"];')
                lines.append(f"  n{parent_id} -> n{nid} [label={n.entry}];")
                rec(nid, n.children)

        rec(0, self.children)
        lines.append("}")
        return "\n".join(lines) + "\n"


def _update_delta(node: TreeNode) -> int | float:
    if node.children:
        node.delta = min(node.own_slack, max(_update_delta(c) for c in node.children))
    else:
        node.delta = node.own_slack
    return node.delta


def _leaf_paths(forest) -> Iterator[tuple[int, tuple[Waypoint, ...]]]:
    stack = [(n, n.entry + n.internal, n.points) for n in reversed(forest)]
    while stack:
        node, cost, seq = stack.pop()
        if not node.children:
            yield cost, seq
            continue
        for c in reversed(node.children):
            stack.append((c, cost + c.entry + c.internal, seq + c.points))


def _stops_along(forest, route):
    if not route:
        return [] if not forest else None
    for n in forest:
        k = len(n.points)
        if route[:k] == n.points:
            rest = _stops_along(n.children, route[k:])
            if rest is not None:
                return [n.points] + rest
    return None


def _preorder(forest) -> Iterator[TreeNode]:
    stack = list(reversed(forest))
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def _common_stops(forest) -> set:
    """Point groups that appear as a stop on every path through ``forest``."""
    common = None
    for n in forest:
        here = {n.points} | (_common_stops(n.children) if n.children else set())
        common = here if common is None else common & here
        if not common:
            return set()
    return common or set()
