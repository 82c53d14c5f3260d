"""Bag-level relation extraction over precomputed sentence embeddings."""

__version__ = "1.0.0"

from .corpus import (
    Bag,
    BagDataset,
    EmbeddingMatrix,
    SentenceRec,
    Vocab,
    load_bags,
    load_embedding_file,
    load_vocab_dir,
    parse_embedding_file,
    write_embedding_file,
)
from .errors import BagsideError, DivergedError, InfeasibleError, ValidationError
from .model import ModelConfig, ModelParams, backward, cross_entropy, forward, predict
from .pipeline import RunConfig
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__all__ = [
    "Bag",
    "BagDataset",
    "BagsideError",
    "DivergedError",
    "EmbeddingMatrix",
    "InfeasibleError",
    "ModelConfig",
    "ModelParams",
    "RunConfig",
    "SentenceRec",
    "TrainConfig",
    "ValidationError",
    "Vocab",
    "__version__",
    "backward",
    "cross_entropy",
    "forward",
    "load_bags",
    "load_checkpoint",
    "load_embedding_file",
    "load_vocab_dir",
    "parse_embedding_file",
    "predict",
    "save_checkpoint",
    "train",
    "write_embedding_file",
]
