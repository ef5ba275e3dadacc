"""
annealfactor
============

Factoring semiprimes as a minimisation problem: exact polynomial objectives,
quadratization to QUBO form, a software model of annealing hardware and the
solvers and sweeps used to study why low-precision hardware fails on them.
"""

__version__ = "0.1.0"
__codename__ = "Dynamic Range"

# Core exports
from annealfactor.core.objective import ProblemSpec, build_objective
from annealfactor.core.quadratize import quadratize
from annealfactor.core.hardware import HardwareModel, degrade
from annealfactor.core.solve import solve_exact, solve_sa

__all__ = [
    "HardwareModel",
    "ProblemSpec",
    "__codename__",
    "__version__",
    "build_objective",
    "degrade",
    "quadratize",
    "solve_exact",
    "solve_sa",
]
