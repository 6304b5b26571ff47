"""Temporal-logic navigation: symbolic LTL planning, MILP reference tracking and STL verification."""

from .env import OccupancyGrid, cell_to_world, load_map, parse_map, world_to_cell
from .errors import InfeasibleError, InputError, NoPathError, TlnavError
from .ltl import parse_ltl
from .stl import parse_stl, robustness
from .symbolic import plan_path
from .tracking import TrackingParams, solve_tracking

__version__ = "0.1.0"

__all__ = [
    "OccupancyGrid",
    "TrackingParams",
    "TlnavError",
    "InputError",
    "NoPathError",
    "InfeasibleError",
    "cell_to_world",
    "world_to_cell",
    "load_map",
    "parse_map",
    "parse_ltl",
    "parse_stl",
    "plan_path",
    "robustness",
    "solve_tracking",
]
