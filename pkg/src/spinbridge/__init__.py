"""Engineered cross-Kerr and nonlinear beam-splitter dynamics from driven spin-boson pairs."""

__version__ = "0.1.0"
