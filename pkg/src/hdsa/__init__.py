"""High-dimensional ridge-penalised piecewise exponential survival model."""

__version__ = "0.1.0"
