"""Noise-driven bifurcations of a nonlocal Fokker-Planck neural-field model."""

__version__ = "0.1.0"
