"""Fleet-level assignment: spatial candidate filter, per-vehicle bids, winner choice.

Every planner exposes the same small interface so the simulator does not
care which scheduler a vehicle runs:

``bid(request, lead)``
    cheapest way to add the request, or ``None``; ``lead`` is the travel
    still needed to reach the planner's root vertex
``commit(bid)``, ``move(vertex, consumed)``, ``advance(waypoint)``
``next_waypoint()``, ``pending`` (number of unfinished waypoints)
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .bnb import best_schedule_bnb
from .bruteforce import best_schedule_bf
from .ktree import KineticTree
from .roadnet import INF
from .trips import Distance, Kind, OnboardTrip, ReschedulingInstance, TripRequest, WaitingTrip, Waypoint

SCHEDULERS = ("bf", "bnb", "tree", "tree_slack", "tree_hotspot")


class GridIndex:
    """Uniform grid over planar positions in meters."""

    def __init__(self, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.cells: dict[tuple[int, int], set[int]] = {}
        self.positions: dict[int, tuple[float, float]] = {}
        self._cell_of: dict[int, tuple[int, int]] = {}

    def cell(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def update(self, vid: int, pos: tuple[float, float]) -> None:
        self.positions[vid] = pos
        c = self.cell(*pos)
        old = self._cell_of.get(vid)
        if old == c:
            return
        if old is not None:
            bucket = self.cells[old]
            bucket.discard(vid)
            if not bucket:
                del self.cells[old]
        self.cells.setdefault(c, set()).add(vid)
        self._cell_of[vid] = c

    def remove(self, vid: int) -> None:
        old = self._cell_of.pop(vid, None)
        self.positions.pop(vid, None)
        if old is not None:
            self.cells[old].discard(vid)
            if not self.cells[old]:
                del self.cells[old]

    def within(self, center: tuple[float, float], radius: float) -> list[int]:
        """Vehicles within Euclidean ``radius`` of ``center``, sorted by id."""
        cx, cy = center
        x0, y0 = self.cell(cx - radius, cy - radius)
        x1, y1 = self.cell(cx + radius, cy + radius)
        r2 = radius * radius + 1e-9
        out = []
        if (x1 - x0 + 1) * (y1 - y0 + 1) > len(self.cells):
            buckets = [b for (gx, gy), b in self.cells.items() if x0 <= gx <= x1 and y0 <= gy <= y1]
        else:
            buckets = [self.cells[(gx, gy)] for gx in range(x0, x1 + 1) for gy in range(y0, y1 + 1) if (gx, gy) in self.cells]
        for bucket in buckets:
            for vid in bucket:
                px, py = self.positions[vid]
                if (px - cx) ** 2 + (py - cy) ** 2 <= r2:
                    out.append(vid)
        return sorted(out)

    def __len__(self) -> int:
        return len(self.positions)


def wait_radius(w_ds: int | float, speed: float) -> float:
    """Meters a vehicle covers within a waiting budget given in deciseconds."""
    return w_ds / 10 * speed


def candidates(index: GridIndex, pickup: tuple[float, float], w_ds: int | float, speed: float) -> list[int]:
    return index.within(pickup, wait_radius(w_ds, speed))


# -- planners ----------------------------------------------------------------


@dataclass
class Bid:
    vehicle: int
    cost: int
    payload: Any = field(repr=False, default=None)
    seconds: float = 0.0


class SequencePlanner:
    """Keeps one selected sequence and re-solves from scratch for every bid."""

    def __init__(self, dist: Distance, root: int, solver: str = "bnb", capacity: int | None = None):
        if solver not in ("bf", "bnb"):
            raise ValueError(f"unknown sequence solver {solver!r}")
        self.dist = dist
        self.root = root
        self.capacity = capacity
        self._solve = best_schedule_bf if solver == "bf" else best_schedule_bnb
        self.onboard: dict[int, OnboardTrip] = {}
        self.waiting: dict[int, WaitingTrip] = {}
        self.route: tuple[Waypoint, ...] = ()

    def instance(self, new: WaitingTrip | None = None) -> ReschedulingInstance:
        return ReschedulingInstance(
            self.root,
            tuple(self.onboard[t] for t in sorted(self.onboard)),
            tuple(self.waiting[t] for t in sorted(self.waiting)),
            new,
            self.capacity,
        )

    def bid(self, req: TripRequest, lead: int = 0):
        new = WaitingTrip.from_request(self.dist, req, lead)
        if new.wait_budget < 0:
            return None
        best = self._solve(self.dist, self.instance(new))
        if best is None:
            return None
        return best.cost, (new, best.sequence)

    def commit(self, payload) -> None:
        new, seq = payload
        self.waiting[new.trip] = new
        self.route = tuple(seq)

    def move(self, vertex: int, consumed: int) -> None:
        self.root = vertex
        if consumed:
            self.onboard = {t: OnboardTrip(t, o.dropoff, o.ride_budget - consumed) for t, o in self.onboard.items()}
            self.waiting = {
                t: WaitingTrip(t, w.pickup, w.dropoff, w.wait_budget - consumed, w.ride_limit)
                for t, w in self.waiting.items()
            }

    def advance(self, wp: Waypoint) -> None:
        if not self.route or self.route[0] != wp:
            raise ValueError(f"{wp} is not the next waypoint")
        if self.root != wp.vertex:
            self.move(wp.vertex, self.dist(self.root, wp.vertex))
        self.route = self.route[1:]
        if wp.kind == Kind.PICKUP:
            w = self.waiting.pop(wp.trip)
            self.onboard[wp.trip] = OnboardTrip(wp.trip, w.dropoff, w.ride_limit)
        else:
            self.onboard.pop(wp.trip)

    def next_waypoint(self) -> Waypoint | None:
        return self.route[0] if self.route else None

    @property
    def pending(self) -> int:
        return len(self.route)

    @property
    def active_trips(self) -> int:
        return len(self.onboard) + len(self.waiting)


class TreePlanner:
    """Adapter exposing a :class:`KineticTree` through the planner interface."""

    def __init__(self, dist: Distance, root: int, mode: str = "slack", capacity: int | None = None, **tree_kwargs):
        self.tree = KineticTree(dist, root, mode=mode, capacity=capacity, **tree_kwargs)

    @property
    def root(self) -> int:
        return self.tree.root

    def instance(self, new: WaitingTrip | None = None) -> ReschedulingInstance:
        return self.tree.instance(new)

    def bid(self, req: TripRequest, lead: int = 0):
        cand = self.tree.try_insert(req, lead)
        if cand is None:
            return None
        return cand.cost, cand

    def commit(self, payload) -> None:
        self.tree.commit(payload)

    def move(self, vertex: int, consumed: int) -> None:
        self.tree.move(vertex, consumed)

    def advance(self, wp: Waypoint) -> None:
        self.tree.advance(wp)

    def next_waypoint(self) -> Waypoint | None:
        return self.tree.next_waypoint()

    @property
    def route(self) -> tuple[Waypoint, ...]:
        return self.tree.route

    @property
    def pending(self) -> int:
        return len(self.tree.route)

    @property
    def active_trips(self) -> int:
        return self.tree.active_trips


def make_planner(
    scheduler: str,
    dist: Distance,
    root: int,
    capacity: int | None = None,
    theta: int = 0,
    invalidation: str = "lazy",
):
    if scheduler in ("bf", "bnb"):
        return SequencePlanner(dist, root, scheduler, capacity)
    if scheduler == "tree":
        return TreePlanner(dist, root, "basic", capacity, invalidation=invalidation)
    if scheduler == "tree_slack":
        return TreePlanner(dist, root, "slack", capacity, invalidation=invalidation)
    if scheduler == "tree_hotspot":
        return TreePlanner(dist, root, "hotspot", capacity, invalidation=invalidation, theta=theta)
    raise ValueError(f"unknown scheduler {scheduler!r}; choose from {', '.join(SCHEDULERS)}")


# -- assignment --------------------------------------------------------------


def collect_bids(
    planners: dict[int, Any],
    vehicle_ids: Iterable[int],
    req: TripRequest,
    lead_of: Callable[[int], int],
    on_bid: Callable[[int, float], None] | None = None,
) -> list[Bid]:
    """Ask each listed vehicle for a bid; the bid cost includes its lead."""
    bids = []
    for vid in vehicle_ids:
        planner = planners[vid]
        lead = lead_of(vid)
        t0 = time.perf_counter()
        got = planner.bid(req, lead)
        spent = time.perf_counter() - t0
        if on_bid is not None:
            on_bid(vid, spent)
        if got is None:
            continue
        cost, payload = got
        if cost == INF:
            continue
        bids.append(Bid(vid, lead + cost, payload, spent))
    return bids


def choose(bids: list[Bid]) -> Bid | None:
    """Minimum cost wins; ties go to the smallest vehicle id."""
    if not bids:
        return None
    return min(bids, key=lambda b: (b.cost, b.vehicle))


def assign(
    planners: dict[int, Any],
    req: TripRequest,
    vehicle_ids: Iterable[int] | None = None,
    lead_of: Callable[[int], int] | None = None,
) -> tuple[int, int] | None:
    """Collect bids, commit the winner and return ``(vehicle, cost)``."""
    ids = sorted(planners) if vehicle_ids is None else vehicle_ids
    bids = collect_bids(planners, ids, req, lead_of or (lambda _v: 0))
    win = choose(bids)
    if win is None:
        return None
    planners[win.vehicle].commit(win.payload)
    return win.vehicle, win.cost
