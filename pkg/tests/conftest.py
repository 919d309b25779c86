import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from ridetree.roadnet import DistanceOracle, RoadNetwork, grid_network

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# small graph with an isolated vertex 5
SMALL_EDGES = [(0, 1, 4), (0, 2, 1), (2, 1, 2), (1, 3, 5), (2, 3, 8), (3, 4, 3)]


@pytest.fixture
def small_net():
    return RoadNetwork(6, SMALL_EDGES)


@pytest.fixture(scope="session")
def grid20():
    net = grid_network(20, 20, weight=10)
    return net, DistanceOracle(net)


@pytest.fixture(scope="session")
def grid5():
    net = grid_network(5, 5, weight=1)
    return net, DistanceOracle(net)


class MatrixDistance:
    """Distance callable backed by an explicit symmetric matrix."""

    def __init__(self, rows):
        self.rows = rows

    def __call__(self, a, b):
        return self.rows[a][b]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
