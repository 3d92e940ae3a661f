"""Photon-level simulation and time-tag analysis of a quantum-dot teleportation relay."""
__version__ = "0.1.0"
