"""Tilt stability of local minimizers of nonlinear programs."""

__version__ = "0.1.0"
