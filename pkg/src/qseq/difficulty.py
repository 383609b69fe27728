"""Personalized difficulty scores from raw answer attempts.

The score is a capped, normalized blend of three signals: missing credit on
the first attempt, the number of retries and the time spent.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .core import AnswerAttempt, PartialOrder, QuestionId, StudentId, order_from_scores

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DifficultyWeights:
    w_grade: float = 0.5
    w_retries: float = 0.3
    w_duration: float = 0.2
    retry_cap: int = 5
    duration_cap: float = 300.0

    def __post_init__(self):
        ws = (self.w_grade, self.w_retries, self.w_duration)
        if any(w < 0 for w in ws):
            raise ValueError(f"weights must be non-negative, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(ws)!r}")
        if self.retry_cap <= 0 or self.duration_cap <= 0:
            raise ValueError("retry_cap and duration_cap must be positive")


DEFAULT_WEIGHTS = DifficultyWeights()


def difficulty_of(attempt: AnswerAttempt, weights: DifficultyWeights = DEFAULT_WEIGHTS) -> float:
    w = weights
    value = (
        w.w_grade * (1.0 - attempt.first_attempt_grade)
        + w.w_retries * min(attempt.retries, w.retry_cap) / w.retry_cap
        + w.w_duration * min(attempt.duration, w.duration_cap) / w.duration_cap
    )
    # guard against 1.0000000000000002 from float summation
    return min(max(value, 0.0), 1.0)


def dedupe(attempts: Iterable[AnswerAttempt]) -> tuple[list[AnswerAttempt], int]:
    """Keep the earliest attempt per (student, question); return (kept, n_dropped)."""
    seen: set[tuple[StudentId, QuestionId]] = set()
    kept = []
    dropped = 0
    for a in attempts:
        key = (a.student, a.question)
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
        kept.append(a)
    return kept, dropped


def scores_from_log(
    attempts: Iterable[AnswerAttempt],
    weights: DifficultyWeights = DEFAULT_WEIGHTS,
) -> dict[StudentId, dict[QuestionId, float]]:
    kept, dropped = dedupe(attempts)
    if dropped:
        log.warning("dropped %d duplicate (student, question) attempts; kept earliest", dropped)
    scores: dict[StudentId, dict[QuestionId, float]] = defaultdict(dict)
    for a in kept:
        scores[a.student][a.question] = difficulty_of(a, weights)
    return dict(scores)


def orders_from_log(
    attempts: Iterable[AnswerAttempt],
    weights: DifficultyWeights = DEFAULT_WEIGHTS,
) -> dict[StudentId, PartialOrder]:
    """Per-student partial order over answered questions, exact ties grouped."""
    return {
        s: order_from_scores(s, per_q, 0.0)
        for s, per_q in scores_from_log(attempts, weights).items()
    }
