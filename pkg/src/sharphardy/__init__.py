"""Numerical checks of sharp Hardy inequalities on mean convex domains.

Modules: symfun (symmetric functions of curvatures), domains (catalog
geometry), distfield (distance fields and the singular set), deltacalc
(the Laplacian of the distance), galerkin and hardyopt (quotients and best
constants), cli (command line).
"""
from .errors import ConfigurationError, DomainError, PreconditionError

__version__ = "0.1.0"
__all__ = ["ConfigurationError", "DomainError", "PreconditionError", "__version__"]
