"""Comparison theory for open projections in finite-dimensional operator algebras."""
from ._kernels import BACKEND as KERNEL_BACKEND
from .algebra import (
    OperatorAlgebra,
    SConvention,
    full_algebra,
    make_algebra,
    upper_triangular,
    wedderburn,
)
from .errors import ConsistencyError, DimensionError, OatError, ParseError, PreconditionError
from .matcore import DEFAULT_TOL, MatSubspace, Tolerance
from .verdict import Answer, Verdict

__version__ = "0.1.0"
__all__ = [
    "Answer", "ConsistencyError", "DEFAULT_TOL", "DimensionError", "KERNEL_BACKEND", "MatSubspace",
    "OatError", "OperatorAlgebra", "ParseError", "PreconditionError", "SConvention", "Tolerance",
    "Verdict", "__version__", "full_algebra", "make_algebra", "upper_triangular", "wedderburn",
]
