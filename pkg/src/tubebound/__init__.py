"""Degree-based bounds on the volume of tubes around real algebraic varieties."""

__version__ = "0.1.0"
