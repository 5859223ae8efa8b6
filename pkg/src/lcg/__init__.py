"""Cluster instruction datasets, train an under-fit scorer, keep the hard part.

The pipeline: embed every instruction, k-means the embeddings into
semantic clusters, train a deliberately under-fit classifier on the
records closest to each centroid (cluster index = pseudo-label), then
score everything else and keep the records the classifier is least
confident about.
"""

from .classifier import MlpModel, NbModel, gelu, mlp_forward, mlp_train, nb_predict, nb_train, softmax
from .clustering import ClusterModel, compute_centroids, kmeans_fit
from .coreset import CoreSet, select_coreset
from .corpus import Dataset, InstructionRecord, load_dataset, write_subset
from .embedding import EmbeddingMatrix, hashing_embed, l2_normalize, load_embeddings, write_embeddings
from .errors import ConfigError, DataError, LcgError, NumericError, StageError
from .pipeline import PipelineConfig, run_pipeline
from .report import ConfidenceHistogram, build_histogram, lr_sweep
from .selection import ScoredRecord, SelectionResult, score_all, select_gold

__version__ = "0.1.0"

__all__ = [
    "ClusterModel", "ConfidenceHistogram", "ConfigError", "CoreSet", "DataError",
    "Dataset", "EmbeddingMatrix", "InstructionRecord", "LcgError", "MlpModel",
    "NbModel", "NumericError", "PipelineConfig", "ScoredRecord", "SelectionResult",
    "StageError", "build_histogram", "compute_centroids", "gelu", "hashing_embed",
    "kmeans_fit", "l2_normalize", "load_dataset", "load_embeddings", "lr_sweep",
    "mlp_forward", "mlp_train", "nb_predict", "nb_train", "run_pipeline",
    "score_all", "select_coreset", "select_gold", "softmax", "write_embeddings",
    "write_subset",
]
