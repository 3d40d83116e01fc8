"""Linear model merging as a proxy for data-mixture optimization, at desk scale."""

from mixmerge.errors import (
    CapacityError,
    ConfigError,
    DegenerateError,
    MixMergeError,
    NumericError,
    PairingError,
    ParameterError,
    StructuralError,
)
from mixmerge.params import ExpertSet, ParamVector, l2_distance, merge_hessian_weighted, merge_linear
from mixmerge.simplex import MixtureGrid, MixtureWeights, enumerate_grid, sample_dirichlet, uniform_mixture

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "DegenerateError",
    "ExpertSet",
    "MixMergeError",
    "MixtureGrid",
    "MixtureWeights",
    "NumericError",
    "PairingError",
    "ParamVector",
    "ParameterError",
    "StructuralError",
    "enumerate_grid",
    "l2_distance",
    "merge_hessian_weighted",
    "merge_linear",
    "sample_dirichlet",
    "uniform_mixture",
]
