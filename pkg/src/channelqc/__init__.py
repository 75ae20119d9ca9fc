"""Fault detection, prioritization and diagnosis for many-channel detectors."""

__version__ = "0.1.0"
