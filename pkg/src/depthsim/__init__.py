"""Synthetic depth-camera simulation and kernel toolkit for legged-robot perception."""

__version__ = "0.1.0"
