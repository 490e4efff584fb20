"""Truncated Fock-space toolkit for quantum central limit experiments."""

__version__ = "0.1.0"
