"""Path-dependent PDEs solved by a cascade of local frozen PDEs."""
from .cascade import (BudgetExceeded, CascadeConfig, build_cascade, evaluate_along_path,
                      global_bound, sandwich_gap, truncation_profile)
from .generator import (ConfigurationError, DomainError, GeneratorSpec, bounding_pair, freeze,
                        make_generator, monotonize, validate_generator)
from .local_pde import BoundaryData, CFLError, Cylinder, ValueField, solve_frozen
from .paths import Partition, Path, PathError, read_path, write_path
from .stochastic import (Estimate, Lattice, SnellProblem, nonlinear_expectation, snell_envelope)
from .terminal import TerminalFunctional, make_terminal

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "BudgetExceeded", "CFLError", "CascadeConfig", "ConfigurationError",
    "Cylinder", "DomainError", "Estimate", "GeneratorSpec", "Lattice", "Partition", "Path",
    "PathError", "SnellProblem", "TerminalFunctional", "ValueField", "bounding_pair",
    "build_cascade", "evaluate_along_path", "freeze", "global_bound", "make_generator",
    "make_terminal", "monotonize", "nonlinear_expectation", "read_path", "sandwich_gap",
    "snell_envelope", "solve_frozen", "truncation_profile", "validate_generator", "write_path",
]
