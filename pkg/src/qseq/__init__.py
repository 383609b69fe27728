"""Personalized question sequencing by difficulty: EduRank and NCF rankers,
rank-correlation metrics, and an evaluation harness."""

from .core import AnswerAttempt, Ordering, PartialOrder, compare, order_from_scores
from .difficulty import DifficultyWeights, difficulty_of, orders_from_log
from .metrics import ap_correlation, ndpm, paired_t_test, spearman_rho
from .ncf import NcfConfig, NcfModel, TrainingRecord

__version__ = "0.1.0"

__all__ = [
    "AnswerAttempt",
    "DifficultyWeights",
    "NcfConfig",
    "NcfModel",
    "Ordering",
    "PartialOrder",
    "TrainingRecord",
    "ap_correlation",
    "compare",
    "difficulty_of",
    "ndpm",
    "order_from_scores",
    "orders_from_log",
    "paired_t_test",
    "spearman_rho",
]
