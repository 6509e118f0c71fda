"""dodslab: a numerical laboratory for first-order delay ordinary
differential systems (a delay ODE paired with a delay relation).

It integrates such systems by the method of steps, verifies Lie point
symmetries on the five-dimensional jet space, ships the classification
catalog of invariant systems, constructs group-invariant exact solutions,
and classifies linear systems by their compatibility condition.
"""

from . import catalog, exprlang, invariant_solutions, linear, solver, symmetry
from .core import (AlgebraRealization, Box, DODSystem, JetPoint, LinearDODS,
                   VectorField, jet_on_manifold, validate_system)
from .solver import PiecewiseSolution, SolverOptions, residual, solve

__version__ = "0.1.0"

__all__ = [
    "catalog", "exprlang", "invariant_solutions", "linear", "solver",
    "symmetry",
    "AlgebraRealization", "Box", "DODSystem", "JetPoint", "LinearDODS",
    "VectorField", "jet_on_manifold", "validate_system",
    "PiecewiseSolution", "SolverOptions", "residual", "solve",
    "__version__",
]
