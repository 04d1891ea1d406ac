"""Simulator for multi-user interactive sessions relayed over LEO constellations."""

__version__ = "0.1.0"
