"""Shared domain types: attempts, partial orders over questions, and
helpers to build and compare them.

Students and questions are identified by plain strings. A partial order is
stored as a list of tie-groups, most difficult first; two questions are
comparable exactly when they sit in different groups.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

StudentId = str
QuestionId = str


class Ordering(enum.Enum):
    MORE_DIFFICULT = 1
    LESS_DIFFICULT = -1
    TIED_OR_INCOMPARABLE = 0


@dataclass(frozen=True)
class AnswerAttempt:
    """One student's interaction with one question."""

    student: StudentId
    question: QuestionId
    first_attempt_grade: float
    retries: int
    duration: float
    questionnaire: str = ""

    def __post_init__(self):
        if not self.student or not self.question:
            raise ValueError("student and question ids must be non-empty")
        if not 0.0 <= self.first_attempt_grade <= 1.0:
            raise ValueError(f"first_attempt_grade out of [0, 1]: {self.first_attempt_grade}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")
        if not self.duration >= 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")


@dataclass(frozen=True)
class PartialOrder:
    """Difficulty ordering of a student over a set of questions.

    ``groups`` lists tie-groups from most to least difficult.
    """

    groups: tuple[frozenset[QuestionId], ...]
    owner: StudentId = ""

    def __post_init__(self):
        groups = tuple(frozenset(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen: set[QuestionId] = set()
        for g in groups:
            if not g:
                raise ValueError("tie-groups must be non-empty")
            if seen & g:
                raise ValueError(f"questions listed twice: {sorted(seen & g)}")
            seen |= g

    @classmethod
    def from_sequence(cls, items: Iterable[QuestionId], owner: StudentId = "") -> "PartialOrder":
        """Total order from a most-difficult-first sequence."""
        return cls(tuple(frozenset([q]) for q in items), owner)

    @cached_property
    def position(self) -> dict[QuestionId, int]:
        return {q: i for i, g in enumerate(self.groups) for q in g}

    @property
    def items(self) -> frozenset[QuestionId]:
        return frozenset(self.position)

    def __len__(self) -> int:
        return len(self.position)

    def __contains__(self, q: object) -> bool:
        return q in self.position

    def is_total(self) -> bool:
        return all(len(g) == 1 for g in self.groups)

    def restrict(self, keep: Iterable[QuestionId]) -> "PartialOrder":
        keep = set(keep)
        groups = tuple(g & keep for g in self.groups)
        return PartialOrder(tuple(g for g in groups if g), self.owner)

    def linearize(self) -> list[QuestionId]:
        """Total order using the global tie-break: ascending id within a group."""
        return [q for g in self.groups for q in sorted(g)]

    def compare(self, a: QuestionId, b: QuestionId) -> Ordering:
        return compare(self, a, b)


def compare(order: PartialOrder, a: QuestionId, b: QuestionId) -> Ordering:
    if a == b:
        raise ValueError("compare needs two distinct questions")
    pos = order.position
    if a not in pos or b not in pos or pos[a] == pos[b]:
        return Ordering.TIED_OR_INCOMPARABLE
    return Ordering.MORE_DIFFICULT if pos[a] < pos[b] else Ordering.LESS_DIFFICULT


def order_from_scores(
    owner: StudentId,
    scores: Mapping[QuestionId, float],
    tie_epsilon: float = 0.0,
) -> PartialOrder:
    """Order questions by descending score.

    Neighbouring scores (in sorted order) that differ by at most
    ``tie_epsilon`` are chained into one tie-group, so a group may span more
    than ``tie_epsilon`` end to end.
    """
    if not scores:
        raise ValueError("scores must be non-empty")
    if tie_epsilon < 0:
        raise ValueError("tie_epsilon must be >= 0")
    for q, s in scores.items():
        if not math.isfinite(s):
            raise ValueError(f"non-finite score for {q!r}: {s}")

    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    groups: list[set[QuestionId]] = [{ranked[0][0]}]
    prev = ranked[0][1]
    for q, s in ranked[1:]:
        if prev - s <= tie_epsilon:
            groups[-1].add(q)
        else:
            groups.append({q})
        prev = s
    return PartialOrder(tuple(frozenset(g) for g in groups), owner)


__all__ = [
    "AnswerAttempt",
    "Ordering",
    "PartialOrder",
    "QuestionId",
    "StudentId",
    "compare",
    "order_from_scores",
]
