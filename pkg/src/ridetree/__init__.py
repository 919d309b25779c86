"""Real-time ridesharing: per-vehicle schedule search and fleet simulation."""

from .bnb import best_schedule_bnb
from .bruteforce import best_schedule_bf, enumerate_valid
from .ktree import KineticTree
from .roadnet import INF, DistanceOracle, RoadNetwork, grid_network, load_network
from .trips import (
    Kind,
    OnboardTrip,
    ReschedulingInstance,
    TripRequest,
    WaitingTrip,
    Waypoint,
)

__all__ = [
    "INF",
    "DistanceOracle",
    "KineticTree",
    "Kind",
    "OnboardTrip",
    "ReschedulingInstance",
    "RoadNetwork",
    "TripRequest",
    "WaitingTrip",
    "Waypoint",
    "best_schedule_bf",
    "best_schedule_bnb",
    "enumerate_valid",
    "grid_network",
    "load_network",
]
