"""Gibbs perturbed lattice point processes: simulation, estimation, diagnostics."""

__version__ = "0.1.0"
