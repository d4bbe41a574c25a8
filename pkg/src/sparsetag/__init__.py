"""Sparse-coded word-embedding features for CRF sequence labeling."""

from .corpus import Dataset, Token
from .crf import CrfModel, TrainConfig
from .embeddings import CoverageReport, EmbeddingTable, load_embeddings
from .features import FeatureConfig, FeatureResources
from .sparse_coding import (
    BasisReport,
    Dictionary,
    SparseCodes,
    SparseCodingConfig,
    encode,
    learn_dictionary,
    solve_lasso,
    sparsity_level,
)

__version__ = "0.1.0"

__all__ = [
    "BasisReport",
    "CoverageReport",
    "CrfModel",
    "Dataset",
    "Dictionary",
    "EmbeddingTable",
    "FeatureConfig",
    "FeatureResources",
    "SparseCodes",
    "SparseCodingConfig",
    "Token",
    "TrainConfig",
    "encode",
    "learn_dictionary",
    "load_embeddings",
    "solve_lasso",
    "sparsity_level",
]
