"""Contrastive Bayesian metric learning on precomputed feature vectors."""

__version__ = "0.1.0"

from .geometry import EmbeddingBatch, normalize_rows, similarity_matrix
from .loss import LossConfig, LossReport, cbml_loss_and_grad
from .trainer import Encoder, TrainConfig, init_encoder, train

__all__ = [
    "EmbeddingBatch",
    "Encoder",
    "LossConfig",
    "LossReport",
    "TrainConfig",
    "cbml_loss_and_grad",
    "init_encoder",
    "normalize_rows",
    "similarity_matrix",
    "train",
]
