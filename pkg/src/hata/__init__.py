"""Human-aware multi-robot task allocation: MoD-based bidding, assignment and coordination."""

from .assignment import Assignment, InfeasibleAssignment, allocate, bottleneck, hungarian
from .cost import TUNED_WEIGHTS, CostMatrix, Weights, cost_matrix, path_cost
from .experiment import Scenario, run_experiment
from .grid import GridSpec
from .mod import MoDLayer, MoDStack, build_layer, build_stack, query
from .planner import GridPath, OccupancyGrid, PlanRequest, Unreachable, plan
from .sim import simulate
from .trajectories import Trajectory, parse_tracks

__all__ = [
    "Assignment", "CostMatrix", "GridPath", "GridSpec", "InfeasibleAssignment", "MoDLayer", "MoDStack",
    "OccupancyGrid", "PlanRequest", "Scenario", "TUNED_WEIGHTS", "Trajectory", "Unreachable", "Weights",
    "allocate", "bottleneck", "build_layer", "build_stack", "cost_matrix", "hungarian", "parse_tracks",
    "path_cost", "plan", "query", "run_experiment", "simulate",
]
