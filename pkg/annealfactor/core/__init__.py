"""
Core pipeline for annealfactor.

Contains the polynomial algebra, factoring objectives, quadratization, the
hardware degradation model, the solvers and the sweep harness.
"""

from annealfactor.core.hardware import HardwareModel
from annealfactor.core.objective import ProblemSpec
from annealfactor.core.harness import SweepConfig

__all__ = ["HardwareModel", "ProblemSpec", "SweepConfig"]
