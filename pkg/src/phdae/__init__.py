"""Linear port-Hamiltonian descriptor systems: structure checks, transformations,
index analysis, regularization and structure-aware simulation."""

from .exceptions import (FitError, HighIndexError, InconsistentInitialValueError, PHDAEError,
                         RankAssumptionError, ShapeError, SingularTransformError, StructureError,
                         TimeVaryingError)
from .matfun import MatFun, as_matfun, fit
from .system import (PHDAESystem, StructureReport, assemble, hamiltonian, output, verify_structure,
                     w_matrix)

__version__ = "0.1.0"

__all__ = [
    "MatFun", "as_matfun", "fit",
    "PHDAESystem", "StructureReport", "assemble", "hamiltonian", "output", "verify_structure",
    "w_matrix",
    "PHDAEError", "ShapeError", "SingularTransformError", "FitError", "StructureError",
    "RankAssumptionError", "HighIndexError", "TimeVaryingError", "InconsistentInitialValueError",
]
