"""Rank-comparison metrics and the paired t-test.

All metrics take a *reference* order (ground truth) and a *predicted* order.
AP correlation needs total orders, so both sides are linearized with the
global tie-break (ascending question id inside a tie-group) before scoring.
NDPM works on the partial orders as given. Spearman's rho gives tied
questions their average rank.
"""

from __future__ import annotations

import bisect
from fractions import Fraction
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .core import PartialOrder


class UndefinedMetricError(ValueError):
    """Raised when a metric has too few comparable items to be defined."""


class DegenerateTestError(ValueError):
    """Raised when paired differences have zero variance."""


def ap_correlation(reference: PartialOrder, predicted: PartialOrder) -> float:
    """AP rank correlation (tau_AP) of ``predicted`` against ``reference``.

    Scored over the reference's items; ``predicted`` must contain all of
    them, extra predicted items are ignored. Errors high up in the predicted
    ranking cost more than errors near the bottom.

    Raises:
        UndefinedMetricError: if the reference has no comparable pair.
    """
    items = reference.items
    missing = items - predicted.items
    if missing:
        raise ValueError(f"predicted order lacks {len(missing)} reference items")
    if len(reference.groups) < 2:
        raise UndefinedMetricError("reference has fewer than 2 comparable items")

    ref_rank = {q: r for r, q in enumerate(reference.linearize())}
    pred = [q for q in predicted.linearize() if q in items]
    n = len(pred)

    # summed exactly so the value does not depend on float summation order
    seen: list[int] = []
    total = Fraction(0)
    for i, q in enumerate(pred):
        r = ref_rank[q]
        if i > 0:
            # items placed above q by the prediction that the reference also puts above q
            total += Fraction(bisect.bisect_left(seen, r), i)
        bisect.insort(seen, r)
    return float(2 * total / (n - 1) - 1)


def ndpm(reference: PartialOrder, predicted: PartialOrder) -> float:
    """Normalized distance-based performance measure; 0 is perfect, 1 reversed.

    Only pairs the reference orders are counted. A contradicted pair costs 2,
    a pair the prediction ties (or omits) costs 1.
    """
    pred_pos = predicted.position
    groups = reference.groups
    n_pairs = 0
    n_wrong = 0
    n_tied = 0
    for gi, upper in enumerate(groups):
        lower = [q for g in groups[gi + 1:] for q in g]
        if not lower:
            break
        for a in upper:
            pa = pred_pos.get(a)
            for b in lower:
                n_pairs += 1
                pb = pred_pos.get(b)
                if pa is None or pb is None or pa == pb:
                    n_tied += 1
                elif pa > pb:
                    n_wrong += 1
    if n_pairs == 0:
        raise UndefinedMetricError("reference has no comparable pairs")
    return (2 * n_wrong + n_tied) / (2 * n_pairs)


def _average_ranks(order: PartialOrder) -> dict[str, float]:
    ranks = {}
    start = 1
    for g in order.groups:
        avg = start + (len(g) - 1) / 2.0
        for q in g:
            ranks[q] = avg
        start += len(g)
    return ranks


def spearman_rho(reference: PartialOrder, predicted: PartialOrder) -> float:
    """Spearman's rho, ``1 - 6 * sum(d^2) / (n (n^2 - 1))``, with average ranks for ties."""
    if reference.items != predicted.items:
        raise ValueError("spearman_rho needs both orders over the same items")
    n = len(reference)
    if n < 2:
        raise UndefinedMetricError("spearman_rho needs at least 2 items")
    rr = _average_ranks(reference)
    pr = _average_ranks(predicted)
    d2 = sum((rr[q] - pr[q]) ** 2 for q in rr)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    t_critical: float
    alpha: float
    mean_difference: float

    @property
    def reject_null(self) -> bool:
        return abs(self.t_statistic) > self.t_critical


def t_critical(alpha: float, dof: int) -> float:
    """Two-sided Student-t critical value."""
    return float(stats.t.ppf(1.0 - alpha / 2.0, dof))


def paired_t_test(pairs: Sequence[tuple[float, float]], alpha: float = 0.05) -> TTestResult:
    """Paired t-test on ``first - second`` for each pair.

    Positive t means the first member of each pair tends to be larger.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if len(pairs) < 2:
        raise ValueError("paired_t_test needs at least 2 pairs")
    d = np.array([a - b for a, b in pairs], dtype=float)
    n = len(d)
    if np.ptp(d) <= 1e-12:
        raise DegenerateTestError("paired differences have zero variance")
    sd = float(np.std(d, ddof=1))
    mean = float(d.mean())
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, t_critical(alpha, n - 1), alpha, mean)
