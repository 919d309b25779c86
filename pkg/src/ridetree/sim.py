"""Event-driven fleet simulation over a trip trace.

Time is kept in integer deciseconds. A vehicle is always committed to the
vertex at the end of its current hop; its planner is rooted there and has
already been charged for the hop. A request arriving while a vehicle is
mid-hop therefore bids with ``lead = arrival - now``: the new trip's waiting
budget shrinks by ``lead`` and the bid cost grows by it. A request that
arrives at the same instant as a vehicle is handled first, so that vehicle
bids from the vertex it has just reached with zero lead.

Idle vehicles cruise: at every intersection they take a uniformly random
incident edge, avoiding an immediate U-turn when another edge exists.
"""

from __future__ import annotations

import csv
import heapq
import io
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .dispatch import SCHEDULERS, GridIndex, collect_bids, choose, make_planner, wait_radius
from .roadnet import DistanceOracle, RoadNetwork
from .trips import Kind, TripRequest, ride_limit


class TraceError(ValueError):
    pass


@dataclass
class SimConfig:
    speed: float = 14.0  # m/s
    capacity: int | None = 4
    wait_s: float = 600.0
    detour: float = 0.2
    fleet_size: int = 10_000
    scheduler: str = "tree_slack"
    invalidation: str = "lazy"
    theta_s: float = 0.0
    seed: int = 0
    cell_size: float | None = None  # meters; default half the wait radius
    max_pending_waypoints: int = 10
    record_timing: bool = True

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"scheduler must be one of {SCHEDULERS}")
        if self.invalidation not in ("eager", "lazy"):
            raise ValueError("invalidation must be eager or lazy")
        if self.speed <= 0 or self.wait_s < 0 or self.detour < 0 or self.fleet_size < 0:
            raise ValueError("speed must be positive; wait, detour and fleet non-negative")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.max_pending_waypoints < 2:
            raise ValueError("max_pending_waypoints must allow one trip")

    @property
    def wait_ds(self) -> int:
        return round(self.wait_s * 10)

    @property
    def theta_ds(self) -> int:
        return round(self.theta_s * 10)


@dataclass
class RequestRecord:
    id: int
    request_time: int
    source: int
    destination: int
    vehicle: int = -1
    cost: int = -1
    candidates: int = 0
    bids: int = 0
    pickup_time: int = -1
    dropoff_time: int = -1
    direct: int = 0
    limit: int = 0
    max_wait: int = 0
    response_s: float = 0.0

    @property
    def served(self) -> bool:
        return self.vehicle >= 0

    @property
    def wait(self) -> int:
        return self.pickup_time - self.request_time if self.pickup_time >= 0 else -1

    @property
    def ride(self) -> int:
        return self.dropoff_time - self.pickup_time if self.dropoff_time >= 0 else -1


@dataclass
class Metrics:
    requests: int = 0
    served: int = 0
    rejected: int = 0
    served_fraction: float = 0.0
    acrt: float = 0.0  # seconds per dispatch decision
    art_by_active: dict[int, float] = field(default_factory=dict)  # seconds per bid
    bids_by_active: dict[int, int] = field(default_factory=dict)
    mean_occupancy: float = 0.0
    max_onboard: int = 0
    violations: int = 0
    end_time: int = 0


@dataclass
class SimResult:
    config: SimConfig
    metrics: Metrics
    log: list[RequestRecord]
    violations: list[str]

    @property
    def assignments(self) -> list[tuple[int, int]]:
        return [(r.id, r.vehicle) for r in self.log]


class _Vehicle:
    __slots__ = ("id", "planner", "vertex", "prev", "arrive", "rng", "leg", "leg_target", "moving")

    def __init__(self, vid, planner, vertex, rng):
        self.id = vid
        self.planner = planner
        self.vertex = vertex
        self.prev = -1
        self.arrive = 0
        self.rng = rng
        self.leg: list[int] = []
        self.leg_target = None
        self.moving = False


def _onboard(planner) -> int:
    tree = getattr(planner, "tree", None)
    return len(tree.onboard if tree is not None else planner.onboard)


def validate_trace(net: RoadNetwork, trace: list[TripRequest]) -> None:
    last = None
    seen = set()
    for r in trace:
        for v in (r.source, r.destination):
            if not 0 <= v < net.vertex_count:
                raise TraceError(f"request {r.id}: vertex {v} not in network of {net.vertex_count} vertices")
        if last is not None and r.request_time < last:
            raise TraceError(f"request {r.id}: trace not sorted by request time")
        if r.id in seen:
            raise TraceError(f"request id {r.id} repeats")
        seen.add(r.id)
        last = r.request_time


def run(
    config: SimConfig,
    net: RoadNetwork,
    trace: list[TripRequest],
    oracle: DistanceOracle | None = None,
    starts: list[int] | None = None,
) -> SimResult:
    """Replay ``trace``; ``starts`` pins vehicle start vertices, otherwise they are seeded."""
    validate_trace(net, trace)
    cfg = config
    oracle = oracle or DistanceOracle(net)
    w = cfg.wait_ds
    adj = net.adjacency
    coords = net.coords
    if starts is None:
        master = random.Random(cfg.seed)
        starts = [master.randrange(net.vertex_count) for _ in range(cfg.fleet_size)]
    elif len(starts) != cfg.fleet_size or not all(0 <= v < net.vertex_count for v in starts):
        raise ValueError("starts must name one network vertex per vehicle")

    radius = wait_radius(w, cfg.speed)
    index = GridIndex(cfg.cell_size or max(radius / 2, 1.0)) if coords is not None else None
    fleet: list[_Vehicle] = []
    planners = {}
    for vid, v in enumerate(starts):
        planner = make_planner(cfg.scheduler, oracle, v, cfg.capacity, cfg.theta_ds, cfg.invalidation)
        veh = _Vehicle(vid, planner, v, random.Random(f"{cfg.seed}:{vid}"))
        fleet.append(veh)
        planners[vid] = planner
        if index is not None:
            index.update(vid, coords[v])

    records: dict[int, RequestRecord] = {}
    events: list[tuple[int, int]] = []
    busy = 0  # vehicles with unfinished waypoints
    area = 0  # onboard passengers integrated over hop time
    max_onboard = 0
    art: dict[int, list[float]] = defaultdict(list)
    responses: list[float] = []

    def depart(veh: _Vehicle, now: int) -> None:
        nonlocal area, max_onboard
        v = veh.vertex
        wp = veh.planner.next_waypoint()
        if wp is not None:
            if veh.leg_target != wp or not veh.leg:
                path = oracle.path(v, wp.vertex)
                veh.leg = path[:0:-1]  # reversed, start excluded
                veh.leg_target = wp
            nxt = veh.leg.pop()
        else:
            nbrs = adj[v]
            if not nbrs:
                veh.moving = False
                veh.arrive = now
                return
            options = [u for u, _ in nbrs if u != veh.prev] or [u for u, _ in nbrs]
            nxt = veh.rng.choice(options)
        hop = _edge(adj, v, nxt)
        load = _onboard(veh.planner)
        area += load * hop
        if load > max_onboard:
            max_onboard = load
        veh.planner.move(nxt, hop)
        veh.prev, veh.vertex, veh.arrive, veh.moving = v, nxt, now + hop, True
        if index is not None:
            index.update(veh.id, coords[nxt])
        heapq.heappush(events, (veh.arrive, veh.id))

    def arrive(veh: _Vehicle, now: int) -> None:
        nonlocal busy
        planner = veh.planner
        had = planner.pending > 0
        while True:
            wp = planner.next_waypoint()
            if wp is None or wp.vertex != veh.vertex:
                break
            planner.advance(wp)
            rec = records[wp.trip]
            if wp.kind == Kind.PICKUP:
                rec.pickup_time = now
            else:
                rec.dropoff_time = now
        if had and planner.pending == 0:
            busy -= 1
        depart(veh, now)

    # every vehicle starts standing at its vertex; it leaves at its first event
    for veh in fleet:
        veh.moving = True
        heapq.heappush(events, (0, veh.id))

    def run_events(until: int | None) -> int:
        """Process events strictly before ``until``, or all remaining work."""
        last = 0
        while events and (until is None or events[0][0] < until):
            if until is None and busy == 0:
                break
            t, vid = heapq.heappop(events)
            arrive(fleet[vid], t)
            last = t
        return last

    cap_pending = cfg.max_pending_waypoints
    end_time = 0
    for req in trace:
        t = req.request_time
        run_events(t)
        end_time = max(end_time, t)
        trip = TripRequest(req.id, req.source, req.destination, t, w, cfg.detour)
        direct = oracle.distance(trip.source, trip.destination)
        rec = RequestRecord(trip.id, t, trip.source, trip.destination,
                            direct=direct, limit=ride_limit(direct, cfg.detour), max_wait=w)
        records[trip.id] = rec

        t0 = time.perf_counter()
        if index is not None:
            near = index.within(coords[trip.source], radius)
        else:
            near = range(len(fleet))
        ids = []
        for vid in near:
            veh = fleet[vid]
            if veh.planner.pending + 2 > cap_pending:
                continue
            lead = max(veh.arrive - t, 0)
            if lead + oracle.distance(veh.vertex, trip.source) > w:
                continue
            ids.append(vid)
        rec.candidates = len(ids)

        def on_bid(vid, spent):
            art[planners[vid].active_trips].append(spent)

        bids = collect_bids(planners, ids, trip, lambda vid: max(fleet[vid].arrive - t, 0), on_bid)
        rec.bids = len(bids)
        win = choose(bids)
        if win is not None:
            veh = fleet[win.vehicle]
            if veh.planner.pending == 0:
                busy += 1
            veh.planner.commit(win.payload)
            veh.leg_target = None
            rec.vehicle, rec.cost = win.vehicle, win.cost
            if not veh.moving:
                heapq.heappush(events, (t, veh.id))
        spent = time.perf_counter() - t0
        rec.response_s = spent
        responses.append(spent)

    end_time = max(end_time, run_events(None))

    log = [records[r.id] for r in trace]
    violations = audit(log)
    m = Metrics()
    m.requests = len(log)
    m.served = sum(r.served for r in log)
    m.rejected = m.requests - m.served
    m.served_fraction = m.served / m.requests if m.requests else 0.0
    m.acrt = sum(responses) / len(responses) if responses else 0.0
    m.art_by_active = {k: sum(v) / len(v) for k, v in sorted(art.items())}
    m.bids_by_active = {k: len(v) for k, v in sorted(art.items())}
    m.mean_occupancy = area / (len(fleet) * end_time) if fleet and end_time else 0.0
    m.max_onboard = max_onboard
    m.violations = len(violations)
    m.end_time = end_time
    return SimResult(cfg, m, log, violations)


def _edge(adj, u, v) -> int:
    for x, wt in adj[u]:
        if x == v:
            return wt
    raise KeyError((u, v))


def audit(log: list[RequestRecord]) -> list[str]:
    """Replay realized pickup and dropoff times against each served trip's limits."""
    out = []
    for r in log:
        if not r.served:
            continue
        if r.pickup_time < 0 or r.dropoff_time < 0:
            out.append(f"trip {r.id}: assigned but never completed")
            continue
        if r.wait > r.max_wait:
            out.append(f"trip {r.id}: waited {r.wait} > {r.max_wait}")
        if r.ride > r.limit:
            out.append(f"trip {r.id}: ride {r.ride} > {r.limit}")
    return out


# -- traces and output -------------------------------------------------------


def generate_trace(
    seed: int,
    net: RoadNetwork,
    n_requests: int,
    clustering: float = 0.0,
    duration_s: float = 3600.0,
) -> list[TripRequest]:
    """Synthetic requests with uniform arrival times over ``duration_s``.

    Each source is a single seeded hub vertex with probability
    ``clustering`` and a uniform vertex otherwise; destinations are uniform
    and differ from the source.
    """
    if n_requests < 0:
        raise ValueError("n_requests must be non-negative")
    if not 0 <= clustering <= 1:
        raise ValueError("clustering must lie in [0, 1]")
    if net.vertex_count < 2:
        raise ValueError("need at least two vertices")
    rng = random.Random(seed)
    n = net.vertex_count
    hub = rng.randrange(n)
    span = max(int(duration_s * 10), 1)
    times = sorted(rng.randrange(span) for _ in range(n_requests))
    out = []
    for i, t in enumerate(times, start=1):
        s = hub if rng.random() < clustering else rng.randrange(n)
        e = rng.randrange(n - 1)
        e += e >= s
        out.append(TripRequest(i, s, e, t))
    return out


TRACE_HEADER = ["id", "time_ds", "source", "destination"]


def format_trace(trace: list[TripRequest]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace:
        w.writerow([r.id, r.request_time, r.source, r.destination])
    return buf.getvalue()


def parse_trace(text: str) -> list[TripRequest]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != TRACE_HEADER:
        raise TraceError(f"trace header must be {','.join(TRACE_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            rid, t, s, e = (int(c) for c in row)
            out.append(TripRequest(rid, s, e, t))
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
    return out


def load_trace(path: str | Path) -> list[TripRequest]:
    return parse_trace(Path(path).read_text())


METRICS_COLUMNS = [
    "scheduler", "requests", "served", "rejected", "served_fraction", "mean_occupancy",
    "max_onboard", "violations", "end_time_s", "acrt_ms",
]

LOG_COLUMNS = [
    "id", "request_time", "source", "destination", "vehicle", "cost", "candidates", "bids",
    "pickup_time", "dropoff_time", "wait", "ride", "direct", "limit", "response_ms",
]


def metrics_rows(result: SimResult) -> list[list]:
    m, cfg = result.metrics, result.config
    acrt = f"{m.acrt * 1000:.3f}" if cfg.record_timing else "NA"
    return [[
        cfg.scheduler, m.requests, m.served, m.rejected, f"{m.served_fraction:.6f}",
        f"{m.mean_occupancy:.6f}", m.max_onboard, m.violations, f"{m.end_time / 10:.1f}", acrt,
    ]]


def write_metrics(result: SimResult, path: str | Path) -> None:
    _write_csv(path, METRICS_COLUMNS, metrics_rows(result))


def write_log(result: SimResult, path: str | Path) -> None:
    timing = result.config.record_timing
    rows = []
    for r in result.log:
        rows.append([
            r.id, r.request_time, r.source, r.destination, r.vehicle, r.cost, r.candidates, r.bids,
            r.pickup_time, r.dropoff_time, r.wait, r.ride, r.direct, r.limit,
            f"{r.response_s * 1000:.3f}" if timing else "NA",
        ])
    _write_csv(path, LOG_COLUMNS, rows)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
