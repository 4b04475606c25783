"""Taylor-polynomial differential dynamic programming for low-thrust trajectories."""

__version__ = "0.3.0"
