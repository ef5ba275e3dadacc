"""
Utility modules for annealfactor.

Contains logging setup and performance logging shared by the pipeline stages.
"""

from annealfactor.utils.logging import setup_logging, get_logger

__all__ = ["setup_logging", "get_logger"]
