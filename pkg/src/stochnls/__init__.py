"""Symbolic and lattice tools for the stochastic cubic Schrödinger equation.

The symbolic half manipulates polynomial functionals of the random field and
their covariance deformations; the numerical half evaluates the resulting
kernels on a periodic lattice and checks them against Monte Carlo.
"""
__version__ = "0.1.0"
