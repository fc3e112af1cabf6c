"""Cross-modal text/video retrieval over pre-extracted feature banks.

Learnable heads (text-conditioned frame pooling, K-way latent-concept
projections with tag-derived auxiliary concepts, a confidence-weighted
similarity) trained with a three-part contrastive objective, plus
querybank-normalization and dual-softmax inference strategies and the
standard retrieval metric suite.
"""

__version__ = "0.1.0"

from . import kernels
from .databank import FeatureBank, load_bank, save_bank
from .inference import RetrievalMetrics, dsl_rerank, evaluate, qb_normalize
from .losses import LossWeights
from .model import ModelParams, bank_similarity, init_params, load_checkpoint
from .synth import SynthConfig, generate_planted_bank
from .trainer import TrainConfig, resume, train

__all__ = [
    "FeatureBank", "LossWeights", "ModelParams", "RetrievalMetrics",
    "SynthConfig", "TrainConfig", "bank_similarity", "dsl_rerank",
    "evaluate", "generate_planted_bank", "init_params", "kernels",
    "load_bank", "load_checkpoint", "qb_normalize", "resume", "save_bank",
    "train",
]
