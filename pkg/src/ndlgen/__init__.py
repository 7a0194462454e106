"""Synthesis of local search neighborhood operators over typed constraint graphs."""

__version__ = "0.1.0"
