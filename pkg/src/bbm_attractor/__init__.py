"""Branching Brownian motion with critical drift: simulation, FKPP numerics and
domain-of-attraction diagnostics for its extremal fixed point."""

__version__ = "0.1.0"
