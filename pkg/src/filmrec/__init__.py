"""Synthetic warped-film generation, UV-map based recovery and evaluation."""

__version__ = "0.1.0"
