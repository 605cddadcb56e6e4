"""Shape-agnostic person-presence detection from 4-band multispectral frames.

People are found by what they wear, not by their outline: each pixel's
band vector is white-balance corrected and classified clothing versus
non-clothing by a tiny MLP; morphology and connected components turn the
resulting clothing map into bounding boxes with confidence 1.0.  The
package also ships the trainer, a detection evaluation harness, a
per-stage benchmark and a synthetic scene generator that stands in for
camera hardware.
"""

from . import bench, evaluate, formats, kernels, mlp, pipeline, radiometry, rng, synth
from .errors import (
    BoundsError,
    DegenerateDataset,
    DegenerateEval,
    DegenerateWhitePlate,
    DomainError,
    FormatError,
    HitomiError,
    ShapeError,
    SpecError,
)
from .formats import DetectionRecord, GroundTruthBox, LabelTable, MultibandFrame
from .mlp import MlpModel, SpectralDataset, TrainConfig
from .pipeline import ClothingMap, DetectionSet, PipelineParams
from .radiometry import WbCoefficients

__version__ = "0.1.0"

__all__ = [
    "bench",
    "evaluate",
    "formats",
    "kernels",
    "mlp",
    "pipeline",
    "radiometry",
    "rng",
    "synth",
    "BoundsError",
    "DegenerateDataset",
    "DegenerateEval",
    "DegenerateWhitePlate",
    "DomainError",
    "FormatError",
    "HitomiError",
    "ShapeError",
    "SpecError",
    "DetectionRecord",
    "GroundTruthBox",
    "LabelTable",
    "MultibandFrame",
    "MlpModel",
    "SpectralDataset",
    "TrainConfig",
    "ClothingMap",
    "DetectionSet",
    "PipelineParams",
    "WbCoefficients",
    "__version__",
]
