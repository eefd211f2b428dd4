"""Distributed computing-aware routing for LEO constellations: simulator, agent and baselines."""

__version__ = "0.1.0"
