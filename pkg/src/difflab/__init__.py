"""Distributed stochastic learning over ad-hoc networks: simulation and rate theory."""

__version__ = "0.1.0"
