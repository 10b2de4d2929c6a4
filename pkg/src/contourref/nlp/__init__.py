from .problem import BLOCKS, BoundSet, NlpProblem, SolverConfig, Weights, build_nlp
from .solution import STATUSES, NlpSolution
from .solver import initial_guess, kkt_residuals, solve
from .io import load_solution, save_solution

__all__ = [
    "BLOCKS",
    "BoundSet",
    "NlpProblem",
    "NlpSolution",
    "STATUSES",
    "SolverConfig",
    "Weights",
    "build_nlp",
    "initial_guess",
    "kkt_residuals",
    "load_solution",
    "save_solution",
    "solve",
]
