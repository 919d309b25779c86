import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import MatrixDistance
from ridetree.bruteforce import best_schedule_bf, enumerate_valid
from ridetree.instances import InstanceConfig, random_instance
from ridetree.mip import (
    ModelError,
    assignment_for,
    build_model,
    check_solution,
    emit_lp,
    objective_value,
    order_of,
    parse_lp,
    row_count,
    solve_exhaustive,
)
from ridetree.roadnet import DistanceOracle, RoadNetwork, grid_network
from ridetree.trips import OnboardTrip, ReschedulingInstance, WaitingTrip

DATA = Path(__file__).parent / "data"
TRIVIAL = MatrixDistance([[0, 3, 5], [3, 0, 4], [5, 4, 0]])
NET = grid_network(5, 5, weight=2)
D = DistanceOracle(NET)


def trivial_model():
    return build_model(TRIVIAL, ReschedulingInstance(0, (), (), WaitingTrip(1, 1, 2, 10, 6)))


def test_trivial_model_shape():
    m = trivial_model()
    assert len(m.lp.binaries) == 9
    assert len(m.lp.rows) == row_count(0, 1) == 19
    assert m.windows == [(0, 0), (3, 10), (7, 15)]
    # M_ij = max(0, l_i + d_ij - e_j)
    assert m.M == [[1, 0, 0], [13, 8, 7], [20, 16, 9]]


def test_row_count_one_onboard_one_waiting():
    inst = ReschedulingInstance(0, (OnboardTrip(1, 6, 40),), (), WaitingTrip(2, 12, 18, 40, 20))
    m = build_model(D, inst)
    assert row_count(1, 1) == 29
    assert len(m.lp.rows) == 29
    assert len(m.lp.binaries) == 16


def test_golden_lp_text():
    assert emit_lp(trivial_model()) == (DATA / "trivial.lp").read_text()


def test_lp_round_trip():
    m = trivial_model()
    lp = parse_lp(emit_lp(m))
    assert lp.objective == m.lp.objective
    assert lp.rows == m.lp.rows
    assert lp.bounds == m.lp.bounds
    assert lp.binaries == m.lp.binaries


def test_parse_errors():
    with pytest.raises(ModelError):
        parse_lp(" obj: x\n")
    with pytest.raises(ModelError):
        parse_lp("Minimize\n obj: x\nSubject To\n c1: x + y\nEnd\n")
    with pytest.raises(ModelError):
        parse_lp("Minimize\n obj: x\nBounds\n 0 < x\nEnd\n")


def test_check_solution_examples():
    m = trivial_model()
    good = assignment_for(m, [0, 1, 2])
    assert check_solution(m, good)
    assert objective_value(m, good) == 7
    # dropoff before pickup: ride rows cannot hold
    assert not check_solution(m, assignment_for(m, [0, 2, 1]))
    # a self loop on a node breaks its own timing row
    loop = dict(good, y_1_2=0.0, y_1_1=1.0, y_0_1=0.0, y_0_2=1.0)
    assert not check_solution(m, loop)
    # fractional successor
    assert not check_solution(m, dict(good, y_0_1=0.5))
    with pytest.raises(ModelError):
        check_solution(m, {"y_0_1": 1.0})


def test_solve_trivial():
    cost, route = solve_exhaustive(trivial_model())
    assert cost == 7 and [p.vertex for p in route] == [1, 2]


def test_unreachable_instance_flagged():
    net = RoadNetwork(4, [(0, 1, 3), (2, 3, 3)])
    m = build_model(DistanceOracle(net), ReschedulingInstance(0, (), (), WaitingTrip(1, 1, 2, 50, 50)))
    assert m.infeasible and solve_exhaustive(m) is None
    # the finite stand-in keeps the LP text numeric
    assert "inf" not in emit_lp(m)


def test_colocated_points_get_order_rows():
    inst = ReschedulingInstance(0, (OnboardTrip(1, 7, 30),), (), WaitingTrip(2, 7, 12, 30, 20))
    m = build_model(D, inst)
    assert any(r.name.startswith("order_") for r in m.lp.rows)
    assert solve_exhaustive(m)[0] == best_schedule_bf(D, inst).cost


def test_capacity_rows():
    inst = ReschedulingInstance(0, (OnboardTrip(1, 24, 60),), (WaitingTrip(2, 6, 18, 60, 40),),
                                WaitingTrip(3, 7, 19, 60, 40), capacity=2)
    m = build_model(D, inst)
    assert any(r.name.startswith("load_") for r in m.lp.rows)
    got = solve_exhaustive(m)
    ref = best_schedule_bf(D, inst)
    assert (got[0], got[1]) == (ref.cost, ref.sequence)


CFG = InstanceConfig(max_wait=30, slack_range=(0, 8), max_waypoints=7, detour=0.5)


@given(st.integers(0, 10**6), st.sampled_from([None, 2]))
def test_exhaustive_solver_matches_brute_force(seed, capacity):
    rng = random.Random(seed)
    cfg = InstanceConfig(**{**CFG.__dict__, "capacity": capacity})
    inst = random_instance(D, NET.vertex_count, rng, cfg)
    model = build_model(D, inst)
    got, ref = solve_exhaustive(model), best_schedule_bf(D, inst)
    if ref is None:
        assert got is None
    else:
        assert got == (ref.cost, ref.sequence)


@given(st.integers(0, 10**6))
def test_valid_schedules_satisfy_rows(seed):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, CFG)
    model = build_model(D, inst)
    for s in enumerate_valid(D, inst):
        values = assignment_for(model, order_of(model, s.sequence))
        assert check_solution(model, values)
        assert objective_value(model, values) == s.cost


@given(st.integers(0, 10**6))
def test_round_trip_random_models(seed):
    rng = random.Random(seed)
    inst = random_instance(D, NET.vertex_count, rng, InstanceConfig(capacity=rng.choice([None, 3])))
    m = build_model(D, inst)
    text = emit_lp(m)
    lp = parse_lp(text)
    assert (lp.objective, lp.rows, lp.bounds, lp.binaries) == (m.lp.objective, m.lp.rows, m.lp.bounds, m.lp.binaries)
    assert emit_lp(m) == text
