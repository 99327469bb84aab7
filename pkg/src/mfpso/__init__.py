"""Mean-field particle swarm optimization: particle solvers, consensus
utilities, one-dimensional mean-field PDE solvers and experiment tooling."""

from .consensus import global_best, laplace_value, local_global_best, smooth_switch
from .objectives import EvalCounter, Objective, make_objective, rescale_to_reference, shift_minimum
from .swarm import RunResult, SolverConfig, Stopping, Swarm, init, run, step

__version__ = "0.1.0"

__all__ = [
    "EvalCounter",
    "Objective",
    "RunResult",
    "SolverConfig",
    "Stopping",
    "Swarm",
    "global_best",
    "init",
    "laplace_value",
    "local_global_best",
    "make_objective",
    "rescale_to_reference",
    "run",
    "shift_minimum",
    "smooth_switch",
    "step",
]
