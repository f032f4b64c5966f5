"""Deterministic control stack and simulator for a 4-DOF assistive feeding arm."""

__version__ = "0.1.0"
