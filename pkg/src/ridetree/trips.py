"""Trips, waypoints, schedules and the validity rules every scheduler shares.

All times and distances are integer deciseconds; budgets may be ``INF``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .roadnet import INF

Distance = Callable[[int, int], "int | float"]


class Kind(IntEnum):
    REQUEST = 0
    PICKUP = 1
    DROPOFF = 2

    def __str__(self) -> str:
        return "rse"[self.value]


@dataclass(frozen=True, order=True)
class Waypoint:
    kind: Kind
    trip: int
    vertex: int

    @property
    def key(self) -> tuple[int, int]:
        return (int(self.kind), self.trip)

    def __str__(self) -> str:
        return f"{self.kind}{self.trip}@{self.vertex}"


def sequence_key(seq: Iterable[Waypoint]) -> tuple[tuple[int, int], ...]:
    """Tie-break key shared by all schedulers: lexicographic ``(kind, trip)``."""
    return tuple(p.key for p in seq)


def ride_limit(direct: int | float, detour: float) -> int | float:
    """Largest integer ride cost allowed by ``(1+detour) * direct``.

    The ratio is taken through its decimal string so ``0.3`` means 3/10,
    not the nearest binary double.
    """
    if direct == INF or detour == INF:
        return INF
    return math.floor(direct * (1 + Fraction(str(detour))))


@dataclass(frozen=True)
class TripRequest:
    """A ride request ``<s, e, w, eps>`` issued at ``request_time``."""

    id: int
    source: int
    destination: int
    request_time: int = 0
    max_wait: int | float = 6000
    detour: float = 0.2

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"trip {self.id}: source equals destination")
        if self.max_wait < 0 or self.detour < 0:
            raise ValueError(f"trip {self.id}: negative constraint")

    def pickup(self) -> Waypoint:
        return Waypoint(Kind.PICKUP, self.id, self.source)

    def dropoff(self) -> Waypoint:
        return Waypoint(Kind.DROPOFF, self.id, self.destination)

    def request_at(self, vertex: int) -> Waypoint:
        return Waypoint(Kind.REQUEST, self.id, vertex)


def trip_cost(dist: Distance, points: Sequence[Waypoint], start: int, end: int) -> int | float:
    """``d_T(x_start, x_end)``: summed shortest distances between consecutive points."""
    if not 0 <= start <= end < len(points):
        raise IndexError(f"bad range [{start}, {end}] for {len(points)} points")
    total = 0
    for a, b in zip(points[start:end], points[start + 1 : end + 1]):
        total += dist(a.vertex, b.vertex)
    return total


@dataclass
class Schedule:
    """Ordered waypoints with the ``(t, l)`` cursor of the executing vehicle.

    ``finished`` counts the waypoints already executed; the cursor sits
    between ``waypoints[finished-1]`` and ``waypoints[finished]``.
    """

    waypoints: list[Waypoint]
    time: int = 0
    vertex: int | None = None
    finished: int = 0

    def __post_init__(self):
        if not 0 <= self.finished <= len(self.waypoints):
            raise ValueError("finished prefix longer than schedule")

    @property
    def unfinished(self) -> list[Waypoint]:
        return self.waypoints[self.finished :]


@dataclass(frozen=True)
class Violation:
    rule: str  # "order", "missing", "wait", "detour" or "unreachable"
    trip: int
    detail: str = ""


def _positions(points: Sequence[Waypoint]) -> dict[int, dict[Kind, int]]:
    pos: dict[int, dict[Kind, int]] = {}
    for i, p in enumerate(points):
        slot = pos.setdefault(p.trip, {})
        if p.kind in slot:
            raise ValueError(f"trip {p.trip} has two {p.kind.name} points")
        slot[p.kind] = i
    return pos


def is_valid_schedule(
    dist: Distance, sched: Schedule, trips: Mapping[int, TripRequest]
) -> tuple[bool, Violation | None]:
    """Check point order, waiting and detour rules; report the first violation."""
    points = sched.waypoints
    for p in points:
        if p.trip not in trips:
            raise KeyError(f"waypoint {p} refers to unknown trip")
    pos = _positions(points)

    for tid in sorted(pos):
        slot = pos[tid]
        order = [slot[k] for k in (Kind.REQUEST, Kind.PICKUP, Kind.DROPOFF) if k in slot]
        if order != sorted(order):
            return False, Violation("order", tid, "request, pickup, dropoff out of order")
        if Kind.DROPOFF in slot and Kind.PICKUP not in slot:
            return False, Violation("missing", tid, "dropoff without pickup")

    for tid in sorted(pos):
        slot, trip = pos[tid], trips[tid]
        if Kind.REQUEST in slot and Kind.PICKUP in slot:
            waited = trip_cost(dist, points, slot[Kind.REQUEST], slot[Kind.PICKUP])
            if waited == INF:
                return False, Violation("unreachable", tid)
            if waited > trip.max_wait:
                return False, Violation("wait", tid, f"waited {waited} > {trip.max_wait}")
        if Kind.PICKUP in slot and Kind.DROPOFF in slot:
            ride = trip_cost(dist, points, slot[Kind.PICKUP], slot[Kind.DROPOFF])
            limit = ride_limit(dist(trip.source, trip.destination), trip.detour)
            if ride == INF:
                return False, Violation("unreachable", tid)
            if ride > limit:
                return False, Violation("detour", tid, f"ride {ride} > {limit}")
    return True, None


def remaining_slack(
    dist: Distance, sched: Schedule, trip: TripRequest, at_index: int
) -> int | float:
    """Slack left for ``trip`` once the schedule has reached ``at_index``.

    Before pickup this is the waiting budget minus the distance covered since
    the request point; from pickup on it is the ride budget minus the ride so
    far.
    """
    points = sched.waypoints
    slot = _positions(points).get(trip.id, {})
    r, s, e = slot.get(Kind.REQUEST), slot.get(Kind.PICKUP), slot.get(Kind.DROPOFF)
    anchor_r = r if r is not None else s
    if anchor_r is None or at_index < anchor_r or (e is not None and at_index > e):
        raise ValueError(f"trip {trip.id} is not active at index {at_index}")
    if s is None or at_index < s:
        if r is None:
            raise ValueError(f"trip {trip.id} has no request point")
        return trip.max_wait - trip_cost(dist, points, r, at_index)
    limit = ride_limit(dist(trip.source, trip.destination), trip.detour)
    return limit - trip_cost(dist, points, s, at_index)


# -- rescheduling instances -------------------------------------------------


@dataclass(frozen=True)
class OnboardTrip:
    """A passenger in the vehicle; ``ride_budget`` bounds ``d_T(l, e)``."""

    trip: int
    dropoff: int
    ride_budget: int | float


@dataclass(frozen=True)
class WaitingTrip:
    """An accepted trip not yet picked up.

    ``wait_budget`` bounds ``d_T(l, s)`` and ``ride_limit`` bounds ``d_T(s, e)``.
    """

    trip: int
    pickup: int
    dropoff: int
    wait_budget: int | float
    ride_limit: int | float

    @classmethod
    def from_request(cls, dist: Distance, req: TripRequest, lead: int = 0) -> "WaitingTrip":
        """Budgets for a fresh request; ``lead`` is travel already committed before the start vertex."""
        return cls(
            req.id,
            req.source,
            req.destination,
            req.max_wait - lead,
            ride_limit(dist(req.source, req.destination), req.detour),
        )


@dataclass(frozen=True)
class ReschedulingInstance:
    """The unfinished points one vehicle must order, starting at ``start``."""

    start: int
    onboard: tuple[OnboardTrip, ...] = ()
    waiting: tuple[WaitingTrip, ...] = ()
    new_trip: WaitingTrip | None = None
    capacity: int | None = None

    def __post_init__(self):
        ids = [t.trip for t in self.onboard] + [t.trip for t in self.all_waiting]
        if len(ids) != len(set(ids)):
            raise ValueError("trip ids repeat within instance")

    @property
    def all_waiting(self) -> tuple[WaitingTrip, ...]:
        return self.waiting + ((self.new_trip,) if self.new_trip is not None else ())

    def waypoints(self) -> list[Waypoint]:
        pts = [Waypoint(Kind.DROPOFF, t.trip, t.dropoff) for t in self.onboard]
        for t in self.all_waiting:
            pts.append(Waypoint(Kind.PICKUP, t.trip, t.pickup))
            pts.append(Waypoint(Kind.DROPOFF, t.trip, t.dropoff))
        return sorted(pts)

    def without_new(self) -> "ReschedulingInstance":
        return ReschedulingInstance(self.start, self.onboard, self.waiting, None, self.capacity)


@dataclass
class Budgets:
    """Per-trip limits of an instance, indexed for fast sequential checks."""

    wait: dict[int, int | float] = field(default_factory=dict)
    ride: dict[int, int | float] = field(default_factory=dict)
    onboard_ride: dict[int, int | float] = field(default_factory=dict)
    capacity: int | None = None
    load: int = 0

    @classmethod
    def of(cls, inst: ReschedulingInstance) -> "Budgets":
        b = cls(capacity=inst.capacity, load=len(inst.onboard))
        for t in inst.onboard:
            b.onboard_ride[t.trip] = t.ride_budget
        for t in inst.all_waiting:
            b.wait[t.trip] = t.wait_budget
            b.ride[t.trip] = t.ride_limit
        return b


def evaluate_sequence(
    dist: Distance, inst: ReschedulingInstance, seq: Sequence[Waypoint]
) -> tuple[int | float | None, Violation | None]:
    """Cost of executing ``seq`` from ``inst.start``, or ``None`` plus the reason it is invalid."""
    expected = inst.waypoints()
    if sorted(seq) != expected:
        return None, Violation("missing", -1, "sequence does not cover the instance points")
    b = Budgets.of(inst)
    cost, here, load = 0, inst.start, b.load
    picked: dict[int, int | float] = {}
    for p in seq:
        cost += dist(here, p.vertex)
        here = p.vertex
        if cost == INF:
            return None, Violation("unreachable", p.trip)
        if p.kind == Kind.PICKUP:
            if cost > b.wait[p.trip]:
                return None, Violation("wait", p.trip, f"arrive {cost} > {b.wait[p.trip]}")
            load += 1
            if b.capacity is not None and load > b.capacity:
                return None, Violation("capacity", p.trip, f"load {load} > {b.capacity}")
            picked[p.trip] = cost
        elif p.trip in b.onboard_ride:
            if cost > b.onboard_ride[p.trip]:
                return None, Violation("detour", p.trip, f"arrive {cost} > {b.onboard_ride[p.trip]}")
            load -= 1
        else:
            if p.trip not in picked:
                return None, Violation("order", p.trip, "dropoff before pickup")
            if cost - picked[p.trip] > b.ride[p.trip]:
                return None, Violation("detour", p.trip, f"ride {cost - picked[p.trip]} > {b.ride[p.trip]}")
            load -= 1
    return cost, None
