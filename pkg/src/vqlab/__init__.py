"""Desk-scale simulations of delegated quantum computation and verification protocols."""

__version__ = "0.1.0"
