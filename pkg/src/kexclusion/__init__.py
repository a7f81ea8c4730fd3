"""Simulation and macroscopic solver toolkit for totally asymmetric K-exclusion."""

from __future__ import annotations

__version__ = "0.1.0"
