"""Quantum down-conversion in lossy, dispersive waveguides."""

__version__ = "0.1.0"

__all__ = ["__version__"]
