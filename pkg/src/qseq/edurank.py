"""Memory-based personalized difficulty ranking.

For a target student, the ``memory_size`` most similar students act as
voters. Each voter's verdict on a question pair is weighted by its AP
similarity to the target, the weighted verdicts are reduced to a sign per
pair, and questions are ranked by Copeland score (net pairwise wins).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .core import PartialOrder, QuestionId, StudentId, compare, order_from_scores
from .metrics import ap_correlation


@dataclass(frozen=True)
class NeighborSet:
    target: StudentId
    neighbors: tuple[tuple[StudentId, float], ...]
    memory_size: int

    def __post_init__(self):
        if self.memory_size < 1:
            raise ValueError("memory_size must be >= 1")
        if len(self.neighbors) > self.memory_size:
            raise ValueError("more neighbors than memory_size")
        if any(s == self.target for s, _ in self.neighbors):
            raise ValueError("target cannot be its own neighbor")


def gamma(q: QuestionId, q_l: QuestionId, order: PartialOrder) -> int:
    """+1 if ``q`` is harder than ``q_l`` in ``order``, -1 if easier, else 0."""
    return compare(order, q, q_l).value


def similarity(target_order: PartialOrder, neighbor_order: PartialOrder) -> float:
    """AP correlation of the neighbor's order against the target's, on shared questions.

    Returns 0 when the shared questions hold no pair the target orders.
    """
    common = target_order.items & neighbor_order.items
    ref = target_order.restrict(common)
    if len(ref.groups) < 2:
        return 0.0
    return ap_correlation(ref, neighbor_order.restrict(common))


def select_neighbors(
    target: StudentId,
    orders: Mapping[StudentId, PartialOrder],
    memory_size: int,
) -> NeighborSet:
    """Top ``memory_size`` students by similarity; ties go to the smaller id."""
    target_order = orders.get(target, PartialOrder(()))
    sims = [
        (s, similarity(target_order, o)) for s, o in orders.items() if s != target
    ]
    sims.sort(key=lambda x: (-x[1], x[0]))
    return NeighborSet(target, tuple(sims[:memory_size]), memory_size)


def relative_vote(
    q: QuestionId,
    q_l: QuestionId,
    neighbors: NeighborSet,
    orders: Mapping[StudentId, PartialOrder],
) -> int:
    total = 0.0
    for s, sim in neighbors.neighbors:
        total += sim * gamma(q, q_l, orders[s])
    return (total > 0) - (total < 0)


def copeland_scores(
    candidates: Iterable[QuestionId],
    neighbors: NeighborSet,
    orders: Mapping[StudentId, PartialOrder],
) -> dict[QuestionId, int]:
    cands = sorted(set(candidates))
    scores = dict.fromkeys(cands, 0)
    # rv is antisymmetric, so each unordered pair is voted once
    for a, b in combinations(cands, 2):
        v = relative_vote(a, b, neighbors, orders)
        scores[a] += v
        scores[b] -= v
    return scores


def rank(
    target: StudentId,
    candidates: Iterable[QuestionId],
    orders: Mapping[StudentId, PartialOrder],
    memory_size: int = 5,
) -> PartialOrder:
    """Rank ``candidates`` for ``target`` by descending Copeland score.

    ``orders`` holds every student's known order, the target's included.
    Questions with equal scores share a tie-group. A target with no known
    order gets zero similarity to everyone and hence one all-tied group.
    """
    candidates = set(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    neighbors = select_neighbors(target, orders, memory_size)
    scores = copeland_scores(candidates, neighbors, orders)
    return order_from_scores(target, scores, 0.0)


__all__ = [
    "NeighborSet",
    "copeland_scores",
    "gamma",
    "rank",
    "relative_vote",
    "select_neighbors",
    "similarity",
]
