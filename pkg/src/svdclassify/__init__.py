"""Two-class image classification from low-rank reconstruction errors.

Images are preprocessed to normalized gray matrices, each class is
summarized by a template (uniform or optimally weighted average), and a
test image is assigned to the class whose template is closest to the
image's rank-k SVD approximation under a chosen matrix norm.  Rank and
norm are selected on the training split; the CLI wraps the whole
pipeline including synthetic-data generation and report rendering.
"""

__version__ = "0.1.0"

from .classifier import (
    EvaluationReport,
    ModelConfig,
    PredictionOutcome,
    RankSweepResult,
    classify,
    evaluate,
    metrics_from_confusion,
    rank_sweep,
    select_norm,
    select_rank,
    sweep_norms,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DatasetError,
    DecodeError,
    ModelFormatError,
    SvdClassifyError,
    UnsupportedFormatError,
)
from .imgio import (
    GRAY_WEIGHTS,
    DatasetItem,
    LabeledDataset,
    RawImage,
    decode_image,
    load_dataset,
    preprocess_image,
    resize_bilinear,
    split_dataset,
    to_grayscale,
)
from .linalg import NormKind, SvdFactors, matrix_norm, matrix_norm_batch, svd, truncate, truncate_many
from .synth import SynthSpec, generate, write_dataset
from .template import (
    ClassTemplate,
    optimize_weights,
    optimized_template,
    project_to_weight_simplex,
    reconstruction_error,
    reconstruction_gradient,
    uniform_template,
    weight_divergence,
)

__all__ = [
    "__version__",
    "ClassTemplate",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DatasetError",
    "DatasetItem",
    "DecodeError",
    "EvaluationReport",
    "GRAY_WEIGHTS",
    "LabeledDataset",
    "ModelConfig",
    "ModelFormatError",
    "NormKind",
    "PredictionOutcome",
    "RankSweepResult",
    "RawImage",
    "SvdClassifyError",
    "SvdFactors",
    "SynthSpec",
    "UnsupportedFormatError",
    "classify",
    "decode_image",
    "evaluate",
    "generate",
    "load_dataset",
    "matrix_norm",
    "matrix_norm_batch",
    "metrics_from_confusion",
    "optimize_weights",
    "optimized_template",
    "preprocess_image",
    "project_to_weight_simplex",
    "rank_sweep",
    "reconstruction_error",
    "reconstruction_gradient",
    "resize_bilinear",
    "select_norm",
    "select_rank",
    "split_dataset",
    "svd",
    "sweep_norms",
    "to_grayscale",
    "truncate",
    "truncate_many",
    "uniform_template",
    "weight_divergence",
    "write_dataset",
]
