"""Numerical laboratory for Tonelli Hamiltonians on tori."""

__version__ = "0.1.0"
