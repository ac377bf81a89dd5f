"""
bilevellearn Python Package

Bi-level learning of regularization parameters for variational denoising,
with the parameter interval closed by its limit regularizers.
"""

__version__ = "0.3.0"
__author__ = "bilevellearn developers"

from .Errors import *
from .GridCore import Domain, Grid, GridSignal, TrainingSet
from .Regularizers import ExtendedParam, FamilySpec, BaseRegularizer, DoubleIntegrand, PhiSpec, RhoSpec
from .LowerSolvers import SolverConfig, solve_family
from .BilevelLearning import ParamGrid, LearnReport, learn, extended_upper, structure_report

__all__ = [
    # Core modules
    'GridCore',
    'Regularizers',
    'LowerSolvers',
    'SpectralFractional',
    'BilevelLearning',
    'MoscoLab',

    # Data handling
    'ImportData',
    'ResultsFormatting',

    # Utilities
    'SolverUtilities',
    'Errors',
    'Demos',
    'cli'
]
