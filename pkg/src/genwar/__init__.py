"""Generative wargame agents on a hex-grid simulator."""

__version__ = "0.1.0"
