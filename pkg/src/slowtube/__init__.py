"""Verified numerics for slow manifolds of fast-slow ODE systems.

The package validates, with interval arithmetic and Krawczyk-type operators,
graph representations of slow manifolds, continuous families of eigenpairs
along them, and tubular / conic / star-shaped isolating neighborhoods with
explicit radii, uniformly over an explicit parameter range [0, eps0].
"""

from .interval import (
    DivisionByZeroInterval,
    DomainError,
    IMatrix,
    Interval,
    IVector,
    hull,
    intersect,
    subset_interior,
)

__version__ = "0.1.0"

__all__ = [
    "Interval",
    "IVector",
    "IMatrix",
    "hull",
    "intersect",
    "subset_interior",
    "DivisionByZeroInterval",
    "DomainError",
    "__version__",
]
