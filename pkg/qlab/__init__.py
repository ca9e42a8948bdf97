"""
qlab: truncated generators, quasi-potentials and exit-time decay laws of compound Poisson processes.
"""

__version__ = "0.1.0"

from qlab.discretize import Domain, assemble_L, assemble_T, build_grid, t_norm
from qlab.errors import ConditionViolatedError, ConfigError, DomainError, MeasureError, NumericalError, QlabError
from qlab.exact_atoms import ExactAtomOperator
from qlab.measures import Atoms, BilateralExponential, DensityTable, LevyMeasure, Mixture
from qlab.quasipotential import build_B, laplace_survival, mean_exit_time, survival_semigroup
from qlab.simulate import simulate_exits, survival_curve
from qlab.spectral import principal_eigen

__all__ = [
    "__version__",
    "LevyMeasure",
    "BilateralExponential",
    "DensityTable",
    "Atoms",
    "Mixture",
    "Domain",
    "build_grid",
    "assemble_T",
    "assemble_L",
    "t_norm",
    "build_B",
    "mean_exit_time",
    "laplace_survival",
    "survival_semigroup",
    "ExactAtomOperator",
    "principal_eigen",
    "simulate_exits",
    "survival_curve",
    "QlabError",
    "MeasureError",
    "DomainError",
    "ConfigError",
    "ConditionViolatedError",
    "NumericalError",
]
