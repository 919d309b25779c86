import pytest

from ridetree.roadnet import INF, DistanceOracle, grid_network
from ridetree.trips import (
    Kind,
    OnboardTrip,
    ReschedulingInstance,
    Schedule,
    TripRequest,
    WaitingTrip,
    Waypoint,
    evaluate_sequence,
    is_valid_schedule,
    remaining_slack,
    ride_limit,
    sequence_key,
    trip_cost,
)

NET = grid_network(5, 5, weight=1)
D = DistanceOracle(NET)


@pytest.mark.parametrize(
    "direct, detour, limit",
    [(10, 0.3, 13), (700, 0.2, 840), (7, 0.5, 10), (0, 0.2, 0), (5, 0, 5), (INF, 0.2, INF)],
)
def test_ride_limit(direct, detour, limit):
    assert ride_limit(direct, detour) == limit


def test_request_validation():
    with pytest.raises(ValueError):
        TripRequest(1, 3, 3)
    with pytest.raises(ValueError):
        TripRequest(1, 3, 4, max_wait=-1)


def test_waypoint_order_and_key():
    a = Waypoint(Kind.PICKUP, 2, 9)
    b = Waypoint(Kind.DROPOFF, 1, 0)
    assert sorted([b, a]) == [a, b]
    assert sequence_key([a, b]) == ((1, 2), (2, 1))
    assert str(a) == "s2@9"


def test_trip_cost_sums_legs():
    pts = [Waypoint(Kind.REQUEST, 1, 0), Waypoint(Kind.PICKUP, 1, 6), Waypoint(Kind.DROPOFF, 1, 24)]
    assert trip_cost(D, pts, 0, 2) == 2 + 6
    assert trip_cost(D, pts, 1, 1) == 0
    with pytest.raises(IndexError):
        trip_cost(D, pts, 2, 1)


def _sched(*pts):
    return Schedule([Waypoint(Kind(k), t, v) for k, t, v in pts])


def test_valid_schedule_and_each_violation():
    trips = {1: TripRequest(1, 6, 24, max_wait=3, detour=0.5), 2: TripRequest(2, 1, 3, max_wait=10, detour=0.0)}
    ok = _sched((0, 1, 0), (1, 1, 6), (2, 1, 24))
    assert is_valid_schedule(D, ok, trips) == (True, None)

    late = _sched((0, 1, 20), (1, 1, 6), (2, 1, 24))
    valid, why = is_valid_schedule(D, late, trips)
    assert not valid and why.rule == "wait" and why.trip == 1

    out_of_order = _sched((0, 1, 0), (2, 1, 24), (1, 1, 6))
    assert is_valid_schedule(D, out_of_order, trips)[1].rule == "order"

    no_pickup = _sched((0, 2, 0), (2, 2, 3))
    assert is_valid_schedule(D, no_pickup, trips)[1].rule == "missing"

    # trip 2 allows no detour; routing via vertex 24 breaks it
    detour = _sched((1, 2, 1), (1, 1, 24), (2, 2, 3))
    trips[1] = TripRequest(1, 24, 6, max_wait=100)
    valid, why = is_valid_schedule(D, detour, trips)
    assert why.rule == "detour" and why.trip == 2

    with pytest.raises(KeyError):
        is_valid_schedule(D, _sched((1, 9, 0)), trips)
    with pytest.raises(ValueError):
        is_valid_schedule(D, _sched((1, 1, 0), (1, 1, 0)), trips)


def test_remaining_slack():
    trip = TripRequest(1, 6, 24, max_wait=5, detour=0.5)
    s = _sched((0, 1, 0), (1, 2, 1), (1, 1, 6), (2, 1, 24))
    assert remaining_slack(D, s, trip, 0) == 5
    assert remaining_slack(D, s, trip, 1) == 4
    # ride limit floor(6 * 1.5) = 9, nothing ridden at pickup
    assert remaining_slack(D, s, trip, 2) == 9
    assert remaining_slack(D, s, trip, 3) == 9 - 6
    with pytest.raises(ValueError):
        remaining_slack(D, s, TripRequest(7, 1, 2), 0)


def test_instance_rejects_repeated_ids():
    with pytest.raises(ValueError):
        ReschedulingInstance(0, (OnboardTrip(1, 3, 9),), (WaitingTrip(1, 2, 4, 9, 9),))


def test_evaluate_sequence():
    inst = ReschedulingInstance(0, (OnboardTrip(1, 24, 16),), (), WaitingTrip(3, 20, 4, 12, 12), capacity=1)
    pts = {(p.kind, p.trip): p for p in inst.waypoints()}
    seq = [pts[Kind.DROPOFF, 1], pts[Kind.PICKUP, 3], pts[Kind.DROPOFF, 3]]
    assert evaluate_sequence(D, inst, seq) == (8 + 4 + 8, None)
    cost, why = evaluate_sequence(D, inst, [seq[1], seq[0], seq[2]])
    assert cost is None and why.rule == "capacity"
    cost, why = evaluate_sequence(D, inst, seq[:2])
    assert why.rule == "missing"
    assert evaluate_sequence(D, inst, [seq[0], seq[2], seq[1]])[1].rule == "order"


def test_from_request_subtracts_lead():
    req = TripRequest(4, 0, 24, max_wait=100, detour=0.25)
    w = WaitingTrip.from_request(D, req, lead=30)
    assert (w.wait_budget, w.ride_limit) == (70, 10)
