"""
Test suite for annealfactor.

Unit tests for each pipeline stage plus end-to-end checks of the factoring
experiments (exact oracles, degraded instances, sweeps and the CLI).
"""
