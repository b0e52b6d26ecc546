"""Desk-scale energy-based modeling laboratory."""

__version__ = "0.1.0"
