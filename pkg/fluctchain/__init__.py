"""
fluct-chain - information propagation in one-dimensional chains with fluctuating fields.

Single-particle trajectory ensembles, exact averaged dynamics, Pauli-basis
master equations and closed-form light-cone bounds.
"""

__version__ = "0.3.0"
