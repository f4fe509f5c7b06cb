"""Topology control on DC grid models: DCOPF, switching heuristics, paradox certificates."""

from .dcopf import DispatchSolution, solve_dc_flow, solve_dcopf
from .grid import Bus, Generator, Line, Network, Topology, apply_topology, load_case, parse_case
from .switching import HeuristicConfig, MoveSet, run_heuristic

__all__ = [
    "Bus", "Generator", "Line", "Network", "Topology", "apply_topology", "load_case", "parse_case",
    "DispatchSolution", "solve_dc_flow", "solve_dcopf",
    "HeuristicConfig", "MoveSet", "run_heuristic",
]
