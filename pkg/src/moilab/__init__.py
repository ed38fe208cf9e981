"""Multiple operator integrals of divided differences on finite Hermitian matrices."""

__version__ = "0.1.0"

from .errors import ConstructionError, DomainError, EigenSolverError, MoilabError, PreconditionError
from .functions import (
    BumpSpec,
    ScalarFunction,
    builtin_a,
    builtin_b,
    builtin_smoothed,
    divided_difference,
    divided_differences,
    f_chain,
    function_from_id,
    polynomial,
    psi,
    rho,
)
from .linalg import SpectralDecomposition, eig, schatten_norm, singular_values, weak_norm
from .moi import MultipleOperatorIntegral, amplify, apply_moi, ensure_invertible, moi_s2_bound
from .reduction import ExponentTuple, consummations, reduce_block, sign_blocks
from .symbols import DividedDifference, MoiSymbol

__all__ = [
    "BumpSpec",
    "ConstructionError",
    "DividedDifference",
    "DomainError",
    "EigenSolverError",
    "ExponentTuple",
    "MoiSymbol",
    "MoilabError",
    "MultipleOperatorIntegral",
    "PreconditionError",
    "ScalarFunction",
    "SpectralDecomposition",
    "amplify",
    "apply_moi",
    "builtin_a",
    "builtin_b",
    "builtin_smoothed",
    "consummations",
    "divided_difference",
    "divided_differences",
    "eig",
    "ensure_invertible",
    "f_chain",
    "function_from_id",
    "moi_s2_bound",
    "polynomial",
    "psi",
    "reduce_block",
    "rho",
    "schatten_norm",
    "sign_blocks",
    "singular_values",
    "weak_norm",
]
