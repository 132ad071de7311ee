"""Replica analysis and simulation of least-square-error precoders."""
__version__ = "0.1.0"
