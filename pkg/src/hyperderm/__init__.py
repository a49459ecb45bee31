"""Snapshot hyperspectral imaging of skin: cube I/O, calibration, simulation and analysis."""

__version__ = "0.1.0"
