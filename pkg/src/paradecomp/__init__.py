"""Parallel operator-decomposition scheme for ``u'' + A u + M(u) = f``."""

from .errors import ConfigurationError, GridMismatchError, OracleValidationError, SolveError
from .laplacian import DirectionalLaplacian, Laplacian, laplacian_splitting
from .scheme import SchemeConfig, SchemeState, Trajectory, run, step
from .splitting import Grid, ProblemSpec, Splitting, inner_product, norm, validate_splitting

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DirectionalLaplacian",
    "Grid",
    "GridMismatchError",
    "Laplacian",
    "OracleValidationError",
    "ProblemSpec",
    "SchemeConfig",
    "SchemeState",
    "SolveError",
    "Splitting",
    "Trajectory",
    "inner_product",
    "laplacian_splitting",
    "norm",
    "run",
    "step",
    "validate_splitting",
]
