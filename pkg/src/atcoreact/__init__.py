"""Conflict detection and ATCO reaction prediction from surveillance trajectories."""

__version__ = "0.1.0"
