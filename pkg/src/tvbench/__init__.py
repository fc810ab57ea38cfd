"""Benchmark of representation learners on a linear TV-noise testbed."""

__version__ = "0.1.0"
