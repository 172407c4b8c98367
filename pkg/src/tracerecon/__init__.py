"""Reconstruct per-decision evidence from agent runtime traces."""

__version__ = "0.1.0"
