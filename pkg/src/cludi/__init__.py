"""Clustering by conditional denoising diffusion over assignment embeddings.

A model is trained by teacher-student self-distillation on precomputed
feature vectors: the teacher runs short stochastic denoising chains to
propose cluster assignments, and the student learns to reconstruct the
corresponding target embeddings from noise in a single step while its
assignment distribution is pulled toward a collapse-resistant version of
the teacher's.  Classification averages assignment distributions over
several independent chains per item.
"""

from .checkpoint import load_model, save_model
from .data import (
    make_mixture,
    read_cldf,
    read_features_auto,
    read_features_csv,
    read_labels_csv,
    write_cldf,
    write_features_csv,
)
from .diffusion import (
    NoiseSchedule,
    build_sqrt_schedule,
    ddim_sigma,
    ddim_step,
    forward_noise,
    make_time_grid,
    min_snr_weight,
    reverse_sample,
    snr,
)
from .errors import (
    CludiError,
    DataFormatError,
    NumericalFailure,
    ValidationError,
)
from .inference import (
    InferenceConfig,
    classify,
    classify_batch,
    evaluate,
    export_embeddings,
)
from .losses import LossConfig, class_loss, diffusion_loss, total_loss
from .metrics import ari, clustering_accuracy, marginal_entropy, nmi
from .trainer import (
    Model,
    TrainConfig,
    augment_features,
    init_model,
    train,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "CludiError",
    "DataFormatError",
    "InferenceConfig",
    "LossConfig",
    "Model",
    "NoiseSchedule",
    "NumericalFailure",
    "TrainConfig",
    "ValidationError",
    "__version__",
    "ari",
    "augment_features",
    "build_sqrt_schedule",
    "class_loss",
    "classify",
    "classify_batch",
    "clustering_accuracy",
    "ddim_sigma",
    "ddim_step",
    "diffusion_loss",
    "evaluate",
    "export_embeddings",
    "forward_noise",
    "init_model",
    "load_model",
    "make_mixture",
    "make_time_grid",
    "marginal_entropy",
    "min_snr_weight",
    "nmi",
    "read_cldf",
    "read_features_auto",
    "read_features_csv",
    "read_labels_csv",
    "reverse_sample",
    "save_model",
    "snr",
    "total_loss",
    "train",
    "train_step",
    "write_cldf",
    "write_features_csv",
]
