"""Held-out questionnaire protocol: pick students and questionnaires, hide
their answers from training and keep the true difficulty order as reference."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .core import AnswerAttempt, PartialOrder, QuestionId, StudentId, order_from_scores
from .difficulty import DEFAULT_WEIGHTS, DifficultyWeights, dedupe, difficulty_of

log = logging.getLogger(__name__)


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class EvalCase:
    student: StudentId
    questionnaire: str
    candidates: frozenset[QuestionId]
    reference: PartialOrder


def _holdout_size(n: int, fraction: float) -> int:
    if fraction >= 1.0:
        return n
    h = max(2, math.ceil(fraction * n))
    if n > 2:
        h = min(h, n - 1)
    return min(h, n)


def make_cases(
    attempts: list[AnswerAttempt],
    n_students: int = 3,
    n_questionnaires: int = 4,
    seed: int = 0,
    weights: DifficultyWeights = DEFAULT_WEIGHTS,
    holdout_fraction: float = 0.5,
) -> tuple[list[AnswerAttempt], list[EvalCase]]:
    """Split ``attempts`` into training attempts and evaluation cases.

    A questionnaire block of a student is eligible when it has at least two
    questions of differing difficulty. From each sampled block a seeded
    subset of ``holdout_fraction`` of its questions (at least two) is held
    out; with a fraction below 1 the rest of the block stays in training so
    the student is never cold.

    Raises:
        ProtocolError: if fewer than ``n_students`` students have
            ``n_questionnaires`` eligible blocks.
    """
    if n_students < 1 or n_questionnaires < 1:
        raise ValueError("n_students and n_questionnaires must be positive")
    if not 0.0 < holdout_fraction <= 1.0:
        raise ValueError("holdout_fraction must be in (0, 1]")
    kept, dropped = dedupe(attempts)
    if dropped:
        log.warning("dropped %d duplicate (student, question) attempts; kept earliest", dropped)

    blocks: dict[StudentId, dict[str, list[AnswerAttempt]]] = defaultdict(lambda: defaultdict(list))
    for a in kept:
        blocks[a.student][a.questionnaire].append(a)

    eligible: dict[StudentId, list[str]] = {}
    for s in sorted(blocks):
        units = sorted(
            u for u, block in blocks[s].items()
            if len({difficulty_of(a, weights) for a in block}) >= 2
        )
        if len(units) < n_questionnaires:
            continue
        if holdout_fraction >= 1.0 and len(blocks[s]) <= n_questionnaires:
            # every answer would be held out
            continue
        eligible[s] = units
    if len(eligible) < n_students:
        raise ProtocolError(
            f"need {n_students} students with {n_questionnaires} eligible questionnaires, "
            f"found {len(eligible)}"
        )

    rng = np.random.default_rng(seed)
    pool = sorted(eligible)
    chosen = sorted(pool[j] for j in rng.choice(len(pool), n_students, replace=False))
    held: set[tuple[StudentId, QuestionId]] = set()
    cases = []
    for s in chosen:
        units = eligible[s]
        picked = sorted(units[j] for j in rng.choice(len(units), n_questionnaires, replace=False))
        for u in picked:
            block = sorted(blocks[s][u], key=lambda a: a.question)
            h = _holdout_size(len(block), holdout_fraction)
            sub = [block[j] for j in sorted(rng.choice(len(block), h, replace=False))]
            scores = {a.question: difficulty_of(a, weights) for a in sub}
            held.update((s, q) for q in scores)
            cases.append(EvalCase(s, u, frozenset(scores), order_from_scores(s, scores, 0.0)))

    training = [a for a in kept if (a.student, a.question) not in held]
    return training, cases
