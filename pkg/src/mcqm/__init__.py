"""Rayleigh-Schroedinger perturbation theory from the twisted Maurer-Cartan
equation on a small Grassmann superspace."""

from .errors import (
    DegenerateLevel,
    DiagramError,
    DimensionError,
    GaugeDomainError,
    HermiticityError,
    MCQMError,
    NotMaurerCartan,
    ObstructionFailure,
    ProblemFormatError,
    TrackingFailure,
)
from .hilbert import EigenDatum, HermitianOperator, select_eigenpair
from .models import ModelSpec, build_model
from .perturbation import PerturbationProblem, PerturbationSeries, build_problem, corrections
from .superspace import (
    DifferentialSpec,
    GaugeElement,
    SuperElement,
    apply_differential,
    bracket,
    gauge_act,
    mc_residual,
    twist,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateLevel",
    "DiagramError",
    "DimensionError",
    "GaugeDomainError",
    "HermiticityError",
    "MCQMError",
    "NotMaurerCartan",
    "ObstructionFailure",
    "ProblemFormatError",
    "TrackingFailure",
    "EigenDatum",
    "HermitianOperator",
    "select_eigenpair",
    "ModelSpec",
    "build_model",
    "PerturbationProblem",
    "PerturbationSeries",
    "build_problem",
    "corrections",
    "DifferentialSpec",
    "GaugeElement",
    "SuperElement",
    "apply_differential",
    "bracket",
    "gauge_act",
    "mc_residual",
    "twist",
]
