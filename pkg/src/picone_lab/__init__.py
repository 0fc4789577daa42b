"""Desk-scale numerical laboratory for indefinite elliptic problems.

Modules
-------
grid
    Uniform meshes, grid functions and trapezoid quadrature.
elliptic
    ``L = -(A u')' + C u`` with Dirichlet or Robin ends; principal eigenpairs.
picone
    Numerical check of the generalized Picone identity.
scalar_branch
    Positive solutions of ``L u = lambda u - a f(u)``: seeding, continuation,
    stability, folds and certificates.
lotka_volterra
    Symbiotic and competitive systems: semitrivial and coexistence states,
    stability windows, region maps and time evolution.
cli
    JSON-configured command line front end.
"""

from .elliptic import BoundaryCondition, EigenPair, EllipticProblem, assemble, principal_eigenpair
from .errors import LabError
from .grid import Field, Grid, integrate, make_grid, sample

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "EigenPair",
    "EllipticProblem",
    "Field",
    "Grid",
    "LabError",
    "assemble",
    "integrate",
    "make_grid",
    "principal_eigenpair",
    "sample",
]
