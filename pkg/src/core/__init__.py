"""Core functionality: parameter space, vision scoring, surrogate, acquisition and the loop."""

from .space import ParameterDef, ParameterSpace, normalize, denormalize
from .vision import DropletImage, SegOpts, score
from .surrogate import GpHyperparams, GpModel, fit
from .acquisition import AcquisitionKind, propose_batch
from .state import ExperimentConfig, ExperimentState, Sample

__all__ = [
    "ParameterDef",
    "ParameterSpace",
    "normalize",
    "denormalize",
    "DropletImage",
    "SegOpts",
    "score",
    "GpHyperparams",
    "GpModel",
    "fit",
    "AcquisitionKind",
    "propose_batch",
    "ExperimentConfig",
    "ExperimentState",
    "Sample",
]
