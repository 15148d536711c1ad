import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irf.data import Dataset, FeatureGrouping
from irf.forest import Forest, ForestParams, fit
from irf.metrics import (
    ScoredLabels,
    TruthSet,
    auc_pr,
    auc_roc,
    best_mcc,
    conditional_prediction,
    contributing_leaves,
    false_positive_weight,
    interaction_auc,
    mcc_score,
    permutation_importance,
    recovery_rate,
)
from irf.simgen import scenario
from irf.tree import DecisionTree

import oracles


def SL(scores, labels, positive_class=1):
    return ScoredLabels(np.asarray(scores, float), np.asarray(labels), positive_class)


def test_auc_pr_examples():
    assert auc_pr(SL([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])) == pytest.approx((1 + 2 / 3) / 2)
    assert auc_pr(SL([0.9, 0.8, 0.1], [1, 1, 0])) == 1.0
    assert auc_pr(SL([0.5] * 5, [1, 0, 0, 1, 0])) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        auc_pr(SL([0.1, 0.2], [0, 0]))


def test_auc_pr_for_class_zero():
    # class 0 scored by 1 - p: the same ranking read from the other end
    data = SL([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], positive_class=0)
    assert auc_pr(data) == pytest.approx(float(oracles.average_precision([0.1, 0.4, 0.35, 0.8], [1, 1, 0, 0])))


def test_auc_roc_examples():
    assert auc_roc(SL([0.9, 0.8, 0.1], [1, 1, 0])) == 1.0
    assert auc_roc(SL([0.3] * 4, [1, 0, 1, 0])) == 0.5
    # pairs (pos, neg): (0.8,0.6) (0.8,0.8) (0.4,0.6) (0.4,0.8) -> 1 + 0.5 = 1.5 of 4
    assert auc_roc(SL([0.8, 0.6, 0.4, 0.8], [1, 0, 1, 0])) == 0.375
    with pytest.raises(ValueError):
        auc_roc(SL([0.1, 0.2], [1, 1]))


def test_scored_labels_validation():
    for scores, labels in [([0.1], [2]), ([0.1, 0.2], [1]), ([], [])]:
        with pytest.raises(ValueError):
            SL(scores, labels)
    with pytest.raises(ValueError):
        SL([0.1], [1], positive_class=3)


def test_ranking_metrics_are_monotone_invariant():
    rng = np.random.default_rng(0)
    s = np.round(rng.random(60), 1)
    y = (rng.random(60) < 0.4).astype(int)
    t = np.exp(3 * s) - 7
    assert auc_pr(SL(s, y)) == pytest.approx(auc_pr(SL(t, y)), abs=1e-15)
    assert auc_roc(SL(s, y)) == pytest.approx(auc_roc(SL(t, y)), abs=1e-15)


scored_st = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=50)


@settings(max_examples=300, deadline=None)
@given(scored_st)
def test_ranking_metrics_match_oracle(pairs):
    scores = [s / 6 for s, _ in pairs]
    labels = [y for _, y in pairs]
    if any(labels):
        assert auc_pr(SL(scores, labels)) == pytest.approx(
            float(oracles.average_precision(scores, labels)), abs=1e-12)
    if 0 < sum(labels) < len(labels):
        assert auc_roc(SL(scores, labels)) == pytest.approx(float(oracles.roc_auc(scores, labels)), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(scored_st, scored_st)
def test_best_mcc_matches_oracle(train, held):
    ts, tl = [s / 6 for s, _ in train], [y for _, y in train]
    es, el = [s / 6 for s, _ in held], [y for _, y in held]
    if not 0 < sum(tl) < len(tl):
        return
    out = best_mcc(SL(ts, tl), SL(es, el))
    t = oracles.best_threshold(ts, tl)
    assert out.threshold == t
    cells = [0, 0, 0, 0]
    for s, y in zip(es, el):
        cells[(0 if s >= t else 2) + (0 if y == 1 else 1)] += 1
    assert out.mcc == pytest.approx(oracles.mcc(*cells), abs=1e-12)
    tp, fp = cells[0], cells[1]
    assert out.ppv == (tp / (tp + fp) if tp + fp else 0.0)


def test_best_mcc_examples():
    out = best_mcc(SL([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]), SL([0.15, 0.85], [0, 1]))
    assert (out.threshold, out.mcc, out.ppv) == (0.8, 1.0, 1.0)
    # MCC is 0 at every cutoff: the lowest candidate, -inf, wins
    out = best_mcc(SL([0.5, 0.5], [0, 1]), SL([0.5], [1]))
    assert out.threshold == -math.inf
    assert mcc_score(0, 0, 3, 4) == 0.0
    with pytest.raises(ValueError):
        best_mcc(SL([0.1, 0.2], [1, 1]), SL([0.1], [1]))


TRUTH = TruthSet({1, 2, 3, 4})


def test_interaction_auc_examples():
    assert interaction_auc({(1, 2): 0.9, (3,): 0.1}, TRUTH) == 1.0
    assert interaction_auc({(1, 2): 0.9, (1, 5): 0.3}, TRUTH) == 1.0
    # positives 0.9, 0.4; negatives 0.6, 0.4 -> 1 + 1 + 0 + 0.5 of 4
    rec = {(1, 2): 0.9, (1, 5): 0.6, (3, 4): 0.4, (6,): 0.4}
    assert interaction_auc(rec, TRUTH) == 0.625
    assert math.isnan(interaction_auc({(5, 6): 1.0}, TRUTH))
    with pytest.raises(ValueError):
        interaction_auc({}, TRUTH)


def test_recovery_rate_examples():
    rec = {(1, 2, 3): 0.7}
    assert [recovery_rate(rec, TRUTH, s) for s in (2, 3, 4)] == [0.5, 0.25, 0.0]
    assert all(recovery_rate({(1, 2, 3, 4, 9): 0.1}, TRUTH, s) == 1.0 for s in (2, 3, 4))
    assert recovery_rate({}, TRUTH, 2) == 0.0
    assert recovery_rate({(1, 2): 0.0}, TRUTH, 2) == 0.0
    for s in (1, 5):
        with pytest.raises(ValueError):
            recovery_rate(rec, TRUTH, s)


def test_false_positive_weight_examples():
    assert false_positive_weight({(1, 2): 0.6, (1, 7): 0.2}, TRUTH, 2) == pytest.approx(0.25)
    assert false_positive_weight({(1, 2): 0.6, (3, 4): 0.2}, TRUTH, 2) == 0.0
    assert false_positive_weight({(5, 6): 0.6}, TRUTH, 2) == 1.0
    assert math.isnan(false_positive_weight({(1, 2, 3): 0.5}, TRUTH, 2))


recovered_st = st.dictionaries(
    st.frozensets(st.integers(0, 7), min_size=1, max_size=4).map(lambda s: tuple(sorted(s))),
    st.integers(0, 10).map(lambda v: v / 10),
    max_size=10,
)


@settings(max_examples=300, deadline=None)
@given(recovered_st, st.frozensets(st.integers(0, 7), min_size=2, max_size=5))
def test_interaction_metrics_match_oracle(recovered, active):
    truth = TruthSet(active)
    if recovered:
        expected = oracles.interaction_auc(recovered, set(active))
        got = interaction_auc(recovered, truth)
        if expected is None:
            assert math.isnan(got)
        else:
            assert got == pytest.approx(float(expected), abs=1e-12)
    for s in range(2, len(active) + 1):
        assert recovery_rate(recovered, truth, s) == pytest.approx(
            float(oracles.recovery_rate(recovered, set(active), s)), abs=1e-12)
        expected = oracles.false_positive_weight(recovered, set(active), s)
        got = false_positive_weight(recovered, truth, s)
        if expected is None:
            assert math.isnan(got)
        else:
            assert got == pytest.approx(float(expected), abs=1e-12)


def _stump(f, thr, left_label, right_label):
    c = lambda lab: [0, 4] if lab else [4, 0]
    return DecisionTree([f, -1, -1], [thr, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                        [[4, 4], c(left_label), c(right_label)], [0.5, 0, 0], 3)


def _forest(trees):
    return Forest(trees, np.ones((len(trees), 8)), ["a", "b", "c"], ForestParams(ntree=len(trees)))


X3 = np.array([[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])


def test_conditional_prediction_hand_built():
    f = _forest([_stump(0, 0.0, 0, 1), _stump(1, 0.0, 1, 0)])
    np.testing.assert_array_equal(conditional_prediction(f, X3, (0,), 0.3),
                                  (np.array([0, 1, 0, 1]) + 0.3) / 2)
    np.testing.assert_array_equal(conditional_prediction(f, X3, (2,), 0.3), np.full(4, 0.3))
    single = _forest([_stump(1, 0.0, 1, 0)])
    np.testing.assert_array_equal(conditional_prediction(single, X3, (1,), 0.3), [1, 1, 0, 0])
    with pytest.raises(ValueError):
        conditional_prediction(f, X3, (), 0.3)


def test_conditional_prediction_uses_groups():
    f = _forest([_stump(0, 0.0, 0, 1), _stump(1, 0.0, 1, 0)])
    g = FeatureGrouping(np.array([0, 0, 1]), ("ab", "c"))
    np.testing.assert_array_equal(conditional_prediction(f, X3, (0,), 0.3, g),
                                  (np.array([0, 1, 0, 1]) + np.array([1, 1, 0, 0])) / 2)


def test_contributing_leaves_shrink_with_larger_sets():
    # root on a; left child splits on b, right child is a leaf
    t = DecisionTree([0, 1, -1, -1, -1], [0.0, 0.0, 0, 0, 0], [1, 2, -1, -1, -1], [4, 3, -1, -1, -1],
                     [[4, 4], [2, 2], [2, 0], [0, 2], [2, 2]], [0.2, 0.3, 0, 0, 0], 3)
    f = _forest([t])
    sub = contributing_leaves(f, (0,))[0]
    sup = contributing_leaves(f, (0, 1))[0]
    assert set(sup.tolist()) == {2, 3}
    assert set(sub.tolist()) == {2, 3, 4}
    assert set(sup.tolist()) <= set(sub.tolist())


def _noise_data(n=400, p=4, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, p)), [f"x{j}" for j in range(p)],
                   (rng.random(n) < 0.3).astype(int))


def test_permutation_importance_full_set_is_plain_metric():
    d = _noise_data()
    f = fit(d, np.ones(d.p), ForestParams(ntree=10, seed=0))
    plain = auc_pr(SL(f.predict_proba(d.features), d.labels))
    for seed in range(3):
        assert permutation_importance(f, d, range(d.p), seed=seed) == plain


def test_permutation_importance_without_signal():
    train, held = _noise_data(seed=1), _noise_data(n=2000, seed=2)
    f = fit(train, np.ones(train.p), ForestParams(ntree=50, seed=1))
    v = permutation_importance(f, held, (0,), seed=3)
    assert abs(v - held.labels.mean()) < 0.05
    assert permutation_importance(f, held, (0,), seed=3) == v
    with pytest.raises(ValueError):
        permutation_importance(f, held, ())


def test_permutation_importance_keeps_true_rule():
    sc = scenario("sim1-and-n500", 0)
    f = fit(sc.train, np.ones(sc.train.p), ForestParams(ntree=100, seed=0))
    plain = auc_pr(SL(f.predict_proba(sc.test.features), sc.test.labels))
    kept = permutation_importance(f, sc.test, sorted(sc.truth.active), seed=0)
    assert abs(kept - plain) <= 0.05
