import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import ap_brute, ndpm_brute, spearman_brute
from qseq.core import PartialOrder
from qseq.metrics import (
    DegenerateTestError,
    UndefinedMetricError,
    ap_correlation,
    ndpm,
    paired_t_test,
    spearman_rho,
    t_critical,
)


def total(seq):
    return PartialOrder.from_sequence(seq)


def po(*groups):
    return PartialOrder(tuple(frozenset(g) for g in groups))


class TestAp:
    def test_identity_and_reverse(self):
        assert ap_correlation(total("abcd"), total("abcd")) == 1.0
        assert ap_correlation(total("abcd"), total("dcba")) == -1.0

    def test_hand_example(self):
        # (2/2) * (1/1 + 1/2) - 1
        assert ap_correlation(total("abc"), total("acb")) == pytest.approx(0.5, abs=1e-15)

    def test_top_errors_cost_more(self):
        top_swap = ap_correlation(total("abcd"), total("bacd"))
        bottom_swap = ap_correlation(total("abcd"), total("abdc"))
        assert top_swap < bottom_swap

    def test_not_symmetric(self):
        ref, pred = total("abcd"), total("bcad")
        assert ap_correlation(ref, pred) != ap_correlation(pred, ref)

    def test_extra_predicted_items_ignored(self):
        assert ap_correlation(total("abc"), total("xaybzc")) == 1.0

    def test_missing_items_rejected(self):
        with pytest.raises(ValueError):
            ap_correlation(total("abc"), total("ab"))

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            ap_correlation(total("a"), total("a"))
        with pytest.raises(UndefinedMetricError):
            ap_correlation(po("ab"), total("ab"))

    def test_ties_use_ascending_id(self):
        # reference [{b,a},{c}] linearizes to a,b,c
        assert ap_correlation(po("ab", "c"), total("abc")) == 1.0


class TestNdpm:
    def test_identity_and_reverse(self):
        assert ndpm(total("abcd"), total("abcd")) == 0.0
        assert ndpm(total("abcd"), total("dcba")) == 1.0

    def test_tie_example(self):
        # (a,b) tied in prediction, (a,c) and (b,c) correct
        assert ndpm(total("abc"), po("ab", "c")) == pytest.approx(1 / 6)

    def test_reference_ties_not_counted(self):
        assert ndpm(po("ab", "c"), total("bac")) == 0.0

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            ndpm(po("abc"), total("abc"))


class TestSpearman:
    def test_identity_and_reverse(self):
        assert spearman_rho(total("abc"), total("abc")) == 1.0
        assert spearman_rho(total("abc"), total("cba")) == -1.0

    def test_swap_last_two(self):
        assert spearman_rho(total("abcd"), total("abdc")) == pytest.approx(0.8, abs=1e-15)

    def test_self_with_ties(self):
        o = po("ab", "c", "de")
        assert spearman_rho(o, o) == 1.0

    def test_average_ranks(self):
        # ranks ref (1.5, 1.5, 3), pred (1, 2, 3): sum d^2 = 0.5
        assert spearman_rho(po("ab", "c"), total("abc")) == pytest.approx(1 - 6 * 0.5 / 24)

    def test_requires_same_items(self):
        with pytest.raises(ValueError):
            spearman_rho(total("abc"), total("abd"))
        with pytest.raises(UndefinedMetricError):
            spearman_rho(total("a"), total("a"))


perms = st.integers(2, 7).flatmap(lambda n: st.tuples(st.permutations(range(n)), st.permutations(range(n))))


@given(perms)
def test_metrics_match_oracles(pair):
    r, p = ([f"q{i}" for i in seq] for seq in pair)
    ref, pred = total(r), total(p)
    assert ap_correlation(ref, pred) == pytest.approx(ap_brute([{q} for q in r], [{q} for q in p]), abs=1e-12)
    assert ndpm(ref, pred) == ndpm_brute([{q} for q in r], [{q} for q in p])
    assert spearman_rho(ref, pred) == pytest.approx(spearman_brute(r, p), abs=1e-12)


@given(perms)
def test_spearman_matches_scipy_and_is_symmetric(pair):
    r, p = ([f"q{i}" for i in seq] for seq in pair)
    rho = spearman_rho(total(r), total(p))
    assert rho == pytest.approx(spearman_rho(total(p), total(r)), abs=1e-12)
    expected = stats.spearmanr([r.index(q) for q in r], [p.index(q) for q in r]).statistic
    assert rho == pytest.approx(expected, abs=1e-12)


@given(perms, st.permutations(list("abcdefg")))
def test_relabeling_invariance(pair, labels):
    r, p = pair
    relabel = {i: labels[i] for i in range(len(r))}
    for metric in (ap_correlation, ndpm, spearman_rho):
        a = metric(total([f"q{i}" for i in r]), total([f"q{i}" for i in p]))
        b = metric(total([relabel[i] for i in r]), total([relabel[i] for i in p]))
        assert a == pytest.approx(b, abs=1e-12)


@given(st.integers(2, 7).flatmap(lambda n: st.permutations(range(n))))
def test_perfect_iff_identical(seq):
    ref = total([f"q{i}" for i in range(len(seq))])
    pred = total([f"q{i}" for i in seq])
    same = list(seq) == sorted(seq)
    assert (ap_correlation(ref, pred) == 1.0) == same
    assert (spearman_rho(ref, pred) == 1.0) == same
    assert (ndpm(ref, pred) == 0.0) == same


class TestPairedT:
    def test_hand_example(self):
        res = paired_t_test([(1, 0), (2, 0), (3, 0)])
        # mean 2, sd 1, t = 2 / (1 / sqrt(3))
        assert res.t_statistic == pytest.approx(2 * np.sqrt(3), abs=1e-12)
        assert res.degrees_of_freedom == 2

    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=12), rng.normal(size=12)
        res = paired_t_test(list(zip(a, b)))
        assert res.t_statistic == pytest.approx(stats.ttest_rel(a, b).statistic, rel=1e-12)

    def test_critical_value_table(self):
        # standard two-sided t table, alpha = 0.05
        assert t_critical(0.05, 11) == pytest.approx(2.201, abs=1e-3)
        assert t_critical(0.05, 2) == pytest.approx(4.303, abs=1e-3)
        assert t_critical(0.01, 11) == pytest.approx(3.106, abs=1e-3)

    def test_reject_rule(self):
        # t = 3.46 stays below the dof-2 critical value 4.30
        assert not paired_t_test([(1, 0), (2, 0), (3, 0)]).reject_null
        res = paired_t_test([(1.0, 0.0), (1.1, 0.0), (0.9, 0.0), (1.05, 0.0)])
        assert res.reject_null and res.t_statistic > 0
        neg = paired_t_test([(0.0, 1.0), (0.0, 1.1), (0.0, 0.9), (0.0, 1.05)])
        assert neg.reject_null and neg.t_statistic < 0

    def test_degenerate(self):
        with pytest.raises(DegenerateTestError):
            paired_t_test([(1, 1), (2, 2), (3, 3)])
        with pytest.raises(DegenerateTestError):
            paired_t_test([(0.3, 0.2), (0.2, 0.1)])

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            paired_t_test([(1, 0)])
        with pytest.raises(ValueError):
            paired_t_test([(1, 0), (2, 0)], alpha=1.5)
