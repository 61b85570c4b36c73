"""Finite element solver for obstacle problems driven by
iota*L + beta.grad + (-Laplace)^s on bounded 1D/2D domains."""

__version__ = "0.1.0"
