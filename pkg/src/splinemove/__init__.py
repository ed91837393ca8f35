"""Parameterization-driven ALE mesh motion on multi-patch spline domains."""

__version__ = "0.1.0"
