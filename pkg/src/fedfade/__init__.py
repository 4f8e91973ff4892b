"""Simulator of federated learning over fading wireless uplinks."""

__version__ = "0.1.0"
