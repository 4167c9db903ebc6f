"""Pseudo-spectral free-surface wave solver and conservation-law auditor."""

__version__ = "0.1.0"
