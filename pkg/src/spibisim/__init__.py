"""Symbolic open bisimulation for the spi calculus."""

__version__ = "0.1.0"
