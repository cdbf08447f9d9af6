"""Baseline recommenders. Every ``fit_*`` returns a :class:`ScoringModel`."""

from .base import ScoringModel, config_hash, top_k_per_row
from .factor import MatrixFactorizationBPR, PureSVD, fit_mf_bpr, fit_puresvd, truncated_svd
from .graph import RP3beta, fit_rp3beta
from .knn import ItemKNN, SimilarityConfig, UserKNN, compute_similarity, fit_knn
from .linear import EASE, ConvergenceWarning, SLIMElasticNet, fit_ease_r, fit_slim_elasticnet
from .simple import RandomModel, TopPop, fit_random, fit_toppop

MODEL_CLASSES = {k.name: k for k in (TopPop, RandomModel, ItemKNN, UserKNN, RP3beta, PureSVD,
                                     MatrixFactorizationBPR, EASE, SLIMElasticNet)}

__all__ = [
    "ScoringModel", "SimilarityConfig", "ConvergenceWarning", "MODEL_CLASSES",
    "fit_toppop", "fit_random", "fit_knn", "fit_rp3beta", "fit_puresvd",
    "fit_mf_bpr", "fit_ease_r", "fit_slim_elasticnet",
    "compute_similarity", "truncated_svd", "config_hash", "top_k_per_row",
]
