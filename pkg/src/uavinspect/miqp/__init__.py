from .model import LE, GE, EQ, MiqpModel, Solution, SolverConfig, Status
from .solve import solve_bb, solve_enumerate, solve_relaxation
from .mps import export_text, parse_text

__all__ = [
    "LE", "GE", "EQ", "MiqpModel", "Solution", "SolverConfig", "Status",
    "solve_bb", "solve_enumerate", "solve_relaxation",
    "export_text", "parse_text",
]
