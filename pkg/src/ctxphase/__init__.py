"""Contextual-phase measurement model for bipartite Bell states."""

__version__ = "0.1.0"
