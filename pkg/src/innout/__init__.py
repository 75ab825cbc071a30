"""Simulation lab for auxiliary information under covariate shift in linear multi-task models."""

__version__ = "0.1.0"
