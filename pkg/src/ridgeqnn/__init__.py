"""Variational-circuit networks as sums of ridge functions."""

__version__ = "0.1.0"
