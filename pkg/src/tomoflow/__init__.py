"""Quadrature-marginal tomography of single-mode states.

The package represents a state by the family of densities of the rotated
and scaled quadrature mu*q + nu*p + delta, provides exact catalog states,
forward projection (Radon transform of the Wigner function), inversion back
to Wigner and density-matrix form, and propagation of the marginal family
in time for free, linear and quadratic potentials.
"""

__version__ = "0.1.0"
