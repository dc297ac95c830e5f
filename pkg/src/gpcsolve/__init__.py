"""Hybrid RDM solver for three-electron systems with pinned generalized Pauli constraints."""

__version__ = "0.1.0"
