"""Proactive UAV network slicing simulator and optimisation library."""

__version__ = "0.1.0"
