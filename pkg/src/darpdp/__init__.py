"""Solver toolkit for the dial-a-ride problem with driver preferences (DARPDP)."""
from .construct import build_initial, cluster_requests
from .engine import RunStats, run_eils, sa_accept
from .exact import ExactLimits, ExactResult, brute_force_solve, export_milp
from .model import (Instance, Request, SolverParams, Vehicle, Vertex, build_instance,
                    validate_instance)
from .schedule import (Cost, InfeasibleRoute, Route, Schedule, Solution, check_feasibility,
                       schedule_route, solution_cost, try_insert)

__version__ = "0.1.0"

__all__ = [
    "Cost", "ExactLimits", "ExactResult", "InfeasibleRoute", "Instance", "Request", "Route",
    "RunStats", "Schedule", "Solution", "SolverParams", "Vehicle", "Vertex",
    "brute_force_solve", "build_initial", "build_instance", "check_feasibility",
    "cluster_requests", "export_milp", "run_eils", "sa_accept", "schedule_route",
    "solution_cost", "try_insert", "validate_instance",
]
