import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ridetree.bruteforce import best_schedule_bf, enumerate_valid
from ridetree.instances import InstanceConfig, random_instance
from ridetree.ktree import KineticTree, TreeCapacityError, TreeStateError, _update_delta
from ridetree.roadnet import INF, DistanceOracle, grid_network
from ridetree.trips import Kind, OnboardTrip, ReschedulingInstance, TripRequest, WaitingTrip, Waypoint

NET = grid_network(5, 5, weight=1)
D = DistanceOracle(NET)

L, E1, S2, E2, S3, E3 = 19, 21, 13, 22, 18, 6


def base_instance():
    return ReschedulingInstance(L, (OnboardTrip(1, E1, 7),), (WaitingTrip(2, S2, E2, 4, 6),))


def labels(seq):
    return [str(p).split("@")[0] for p in seq]


def leaf_set(tree):
    return sorted((tuple(labels(s)), c) for s, c in tree.schedules())


@pytest.mark.parametrize("mode", ["basic", "slack", "hotspot"])
def test_insertion_fixture(mode):
    tree = KineticTree.from_instance(D, base_instance(), mode=mode)
    assert leaf_set(tree) == [(("s2", "e1", "e2"), 7), (("s2", "e2", "e1"), 6)]
    cand = tree.try_insert(TripRequest(3, S3, E3, max_wait=7, detour=1.0))
    assert cand.cost == 9
    assert labels(cand.route) == ["s2", "s3", "e2", "e1", "e3"]
    # insertion leaves the committed tree untouched until commit
    assert tree.leaf_count() == 2
    tree.commit(cand)
    assert leaf_set(tree) == [
        (("s2", "s3", "e1", "e2", "e3"), 11),
        (("s2", "s3", "e2", "e1", "e3"), 9),
        (("s3", "s2", "e2", "e1", "e3"), 9),
    ]
    assert tree.next_waypoint() == Waypoint(Kind.PICKUP, 2, S2)
    assert tree.cost == 9 and tree.active_trips == 3


def test_slack_rejects_without_losing_schedules():
    basic = KineticTree.from_instance(D, base_instance(), mode="basic")
    slack = KineticTree.from_instance(D, base_instance(), mode="slack")
    req = TripRequest(3, S3, E3, max_wait=7, detour=1.0)
    a, b = basic.try_insert(req), slack.try_insert(req)
    assert a.stats.delta_rejections == 0
    assert b.stats.delta_rejections > 0
    assert b.stats.evaluations <= a.stats.evaluations
    assert (a.cost, a.route) == (b.cost, b.route)


def test_rejected_insert():
    tree = KineticTree.from_instance(D, base_instance())
    assert tree.try_insert(TripRequest(3, 0, 24, max_wait=2)) is None
    assert tree.try_insert(TripRequest(4, S3, E3), lead=7000) is None
    with pytest.raises(TreeStateError):
        tree.try_insert(TripRequest(2, S3, E3))


def test_empty_tree():
    tree = KineticTree(D, 12)
    assert tree.schedules() == [((), 0)]
    assert tree.next_waypoint() is None and tree.cost == 0
    cand = tree.try_insert(TripRequest(1, 13, 14, max_wait=1))
    assert cand.cost == 2 and labels(cand.route) == ["s1", "e1"]
    assert tree.try_insert(TripRequest(2, 0, 14, max_wait=3)) is None


def test_advance_through_one_trip():
    tree = KineticTree(D, 0)
    tree.commit(tree.try_insert(TripRequest(1, 2, 4, max_wait=10)))
    tree.advance(Waypoint(Kind.PICKUP, 1, 2))
    assert tree.root == 2
    assert tree.onboard == {1: OnboardTrip(1, 4, 2)}
    assert [s for s, _ in tree.schedules()] == [(Waypoint(Kind.DROPOFF, 1, 4),)]
    tree.advance(Waypoint(Kind.DROPOFF, 1, 4))
    assert tree.active_trips == 0 and tree.schedules() == [((), 0)]


def test_advance_wrong_waypoint():
    tree = KineticTree(D, 0)
    tree.commit(tree.try_insert(TripRequest(1, 2, 4)))
    with pytest.raises(TreeStateError):
        tree.advance(Waypoint(Kind.DROPOFF, 1, 4))


def test_commit_guards():
    tree = KineticTree(D, 0)
    other = KineticTree(D, 0)
    cand = tree.try_insert(TripRequest(1, 2, 4))
    with pytest.raises(TreeStateError):
        other.commit(cand)
    stale = tree.try_insert(TripRequest(2, 3, 4))
    tree.commit(cand)
    with pytest.raises(TreeStateError):
        tree.commit(stale)


def test_constructor_validation():
    with pytest.raises(ValueError):
        KineticTree(D, 0, mode="fast")
    with pytest.raises(ValueError):
        KineticTree(D, 0, invalidation="never")
    with pytest.raises(ValueError):
        KineticTree(D, 0, theta=-1)


def test_from_instance_without_schedule():
    inst = ReschedulingInstance(0, (OnboardTrip(1, 24, 3),))
    with pytest.raises(TreeStateError):
        KineticTree.from_instance(D, inst)


def test_delta_is_min_of_own_and_best_child():
    tree = KineticTree.from_instance(D, base_instance())
    (s2,) = tree.children
    assert s2.delta == min(s2.own_slack, max(c.delta for c in s2.children))
    for leaf in (c.children[0] for c in s2.children):
        assert leaf.delta == leaf.own_slack
    assert _update_delta(s2) == s2.delta


def test_lazy_and_eager_agree_after_move():
    trees = {inv: KineticTree.from_instance(D, base_instance(), invalidation=inv) for inv in ("lazy", "eager")}
    for t in trees.values():
        t.move(14, 1)
    assert trees["lazy"].dirty and not trees["eager"].dirty
    assert leaf_set(trees["lazy"]) == leaf_set(trees["eager"])
    assert not trees["lazy"].dirty


def test_move_rebases_budgets():
    tree = KineticTree.from_instance(D, base_instance())
    tree.move(18, 1)
    assert tree.onboard[1].ride_budget == 6 and tree.waiting[2].wait_budget == 3
    assert leaf_set(tree) == [(("s2", "e1", "e2"), 6), (("s2", "e2", "e1"), 5)]
    with pytest.raises(ValueError):
        tree.move(19, -1)


def test_move_away_expires_every_schedule():
    tree = KineticTree.from_instance(D, base_instance())
    tree.move(24, 1)
    tree.schedules()
    assert tree.children == []
    assert enumerate_valid(D, tree.instance()) == []


def test_hotspot_merges_colocated_pickup():
    inst = ReschedulingInstance(0, (), (WaitingTrip(1, 12, 24, 20, 20),))
    tree = KineticTree.from_instance(D, inst, mode="hotspot", theta=0)
    cand = tree.try_insert(TripRequest(2, 12, 20, max_wait=20, detour=1.0))
    assert cand.stats.merges == 1
    tree.commit(cand)
    assert [n.points for n in tree.children] == [
        (Waypoint(Kind.PICKUP, 1, 12), Waypoint(Kind.PICKUP, 2, 12))
    ]
    plain = KineticTree.from_instance(D, inst, mode="basic")
    plain.commit(plain.try_insert(TripRequest(2, 12, 20, max_wait=20, detour=1.0)))
    assert tree.cost == plain.cost
    assert tree.leaf_count() < plain.leaf_count()
    # the merged stop splits again once reached
    tree.advance(tree.next_waypoint())
    assert tree.next_waypoint().trip == 2 and tree.next_waypoint().kind == Kind.PICKUP


def test_leaf_guard():
    tree = KineticTree(D, 12, mode="basic", leaf_limit=50)
    for i, (s, e) in enumerate([(11, 13), (7, 17)], start=1):
        tree.commit(tree.try_insert(TripRequest(i, s, e, max_wait=100, detour=5.0)))
    with pytest.raises(TreeCapacityError):
        tree.try_insert(TripRequest(3, 6, 18, max_wait=100, detour=5.0))
    # a failed build leaves the committed tree usable
    assert tree.leaf_count() == 6


def test_dumps():
    tree = KineticTree.from_instance(D, base_instance())
    text = tree.dump_text()
    assert text.splitlines()[0] == "root@19"
    assert "  s2@13 [entry=2" in text
    dot = tree.dump_edges()
    assert dot.startswith("digraph ktree {") and dot.count("->") == 5


def _keys(seq):
    return tuple((int(p.kind), p.trip) for p in seq)


CFG = InstanceConfig(max_wait=14, slack_range=(0, 6), max_waypoints=8, detour=0.5)


@given(st.integers(0, 10**6), st.sampled_from(["basic", "slack"]), st.sampled_from(["lazy", "eager"]))
def test_insert_matches_brute_force(seed, mode, invalidation):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    try:
        tree = KineticTree.from_instance(D, inst.without_new(), mode=mode, invalidation=invalidation)
    except TreeStateError:
        assert enumerate_valid(D, inst.without_new()) == []
        return
    cand = tree.insert_waiting(inst.new_trip)
    ref = best_schedule_bf(D, inst)
    if ref is None:
        assert cand is None
        return
    assert (cand.cost, _keys(cand.route)) == (ref.cost, _keys(ref.sequence))
    tree.commit(cand)
    expected = sorted((_keys(s.sequence), s.cost) for s in enumerate_valid(D, inst))
    assert sorted((_keys(s), c) for s, c in tree.schedules()) == expected


@given(st.integers(0, 10**6), st.sampled_from(["lazy", "eager"]), st.integers(1, 6))
def test_movement_keeps_tree_exact(seed, invalidation, steps):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    if best_schedule_bf(D, inst) is None:
        return
    tree = KineticTree.from_instance(D, inst, invalidation=invalidation)
    for _ in range(steps):
        nxt = tree.next_waypoint()
        if nxt is None:
            break
        if tree.root == nxt.vertex:
            tree.advance(nxt)
        else:
            v = D.path(tree.root, nxt.vertex)[1]
            tree.move(v, D(tree.root, v))
        now = tree.instance()
        expected = sorted((_keys(s.sequence), s.cost) for s in enumerate_valid(D, now)) or [((), 0)]
        assert sorted((_keys(s), c) for s, c in tree.schedules()) == expected


@given(st.integers(0, 10**6))
def test_hotspot_theta_zero_distinct_vertices_is_exact(seed):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    verts = [inst.start] + [p.vertex for p in inst.waypoints()]
    if len(set(verts)) != len(verts):
        return
    ref = best_schedule_bf(D, inst)
    try:
        tree = KineticTree.from_instance(D, inst.without_new(), mode="hotspot", theta=0)
    except TreeStateError:
        return
    cand = tree.insert_waiting(inst.new_trip)
    assert (cand is None) == (ref is None)
    if ref is not None:
        assert cand.cost == ref.cost


def _tolerates(inst, seq, delay):
    """Is ``seq`` still valid when every arrival is pushed back by ``delay``?"""
    wait = {t.trip: t.wait_budget for t in inst.all_waiting}
    ride = {t.trip: t.ride_limit for t in inst.all_waiting}
    onboard = {t.trip: t.ride_budget for t in inst.onboard}
    here, cost, picked = inst.start, delay, {}
    for p in seq:
        cost += D(here, p.vertex)
        here = p.vertex
        if p.kind == Kind.PICKUP:
            if cost > wait[p.trip]:
                return False
            picked[p.trip] = cost
        elif p.trip in onboard:
            if cost > onboard[p.trip]:
                return False
        elif cost - picked[p.trip] > ride[p.trip]:
            return False
    return True


@given(st.integers(0, 10**6))
def test_delta_is_largest_tolerated_delay(seed):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    if best_schedule_bf(D, inst) is None:
        return
    tree = KineticTree.from_instance(D, inst)
    for c in tree.children:
        paths = [s for s, _ in tree.schedules() if s[: len(c.points)] == c.points]
        assert paths
        assert any(_tolerates(inst, s, c.delta) for s in paths)
        assert not any(_tolerates(inst, s, c.delta + 1) for s in paths)


@given(st.integers(0, 10**6))
def test_slack_pruning_keeps_every_schedule(seed):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    built = {}
    for mode in ("basic", "slack"):
        try:
            tree = KineticTree.from_instance(D, inst.without_new(), mode=mode)
        except TreeStateError:
            return
        cand = tree.insert_waiting(inst.new_trip)
        if cand is not None:
            tree.commit(cand)
            built[mode] = (sorted((_keys(s), c) for s, c in tree.schedules()), cand.stats.evaluations)
        else:
            built[mode] = None
    if built["basic"] is None:
        assert built["slack"] is None
    else:
        assert built["slack"][0] == built["basic"][0]
        assert built["slack"][1] <= built["basic"][1]
