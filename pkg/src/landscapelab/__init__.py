"""Landscape functions, maximal functions and Agmon distances for discrete Schrödinger operators."""
from .grid import Grid, ScalarField, integrate
from .operators import (AntisymmetricField, EdgePhaseField, MatrixField, SelectionOfPairs,
                        SparseOperator, assemble_magnetic, assemble_real,
                        enumerate_admissible_selections)
from .solvers import apply_resolvent, green_column, lowest_eigenpairs, solve_linear
from .landscape import landscape_bounded, landscape_exhaustion, landscape_magnetic_surrogate
from .potentials import PotentialSpec, VectorPotentialSpec, generate_potential
from .maximal import maximal_function
from .agmon import agmon_distance_field, sublevel_set
from .counting import count_eigenvalues, counting_sweep, cube_counting_Ntilde, fit_sandwich_constants
from .estimators import AgmonDistance, LandscapeFunction, MaximalFunction

__version__ = "0.1.0"

__all__ = [
    "Grid", "ScalarField", "integrate",
    "AntisymmetricField", "EdgePhaseField", "MatrixField", "SelectionOfPairs", "SparseOperator",
    "assemble_magnetic", "assemble_real", "enumerate_admissible_selections",
    "apply_resolvent", "green_column", "lowest_eigenpairs", "solve_linear",
    "landscape_bounded", "landscape_exhaustion", "landscape_magnetic_surrogate",
    "PotentialSpec", "VectorPotentialSpec", "generate_potential",
    "maximal_function", "agmon_distance_field", "sublevel_set",
    "count_eigenvalues", "counting_sweep", "cube_counting_Ntilde", "fit_sandwich_constants",
    "AgmonDistance", "LandscapeFunction", "MaximalFunction",
]
