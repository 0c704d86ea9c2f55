"""Harmonic frequency-response analysis and hybrid simulation of reset control systems."""

__version__ = "0.1.0"
