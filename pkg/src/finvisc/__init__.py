"""Finite-deformation viscoelasticity of the two-potential family."""

__version__ = "0.1.0"
