"""Prediction metrics and interaction-level evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class ScoredLabels:
    """Scores for ``positive_class`` alongside the true 0/1 labels; higher
    scores mean more likely to be ``positive_class``."""

    scores: np.ndarray
    labels: np.ndarray
    positive_class: int = 1

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels)
        if s.ndim != 1 or s.shape != y.shape or len(s) < 1:
            raise ValueError("scores and labels must be equal-length, nonempty vectors")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if self.positive_class not in (0, 1):
            raise ValueError("positive_class must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int8))

    @property
    def positive(self) -> np.ndarray:
        return self.labels == self.positive_class


@dataclass(frozen=True)
class TruthSet:
    active: frozenset

    def __post_init__(self):
        a = frozenset(int(i) for i in self.active)
        if not a:
            raise ValueError("truth set must be nonempty")
        object.__setattr__(self, "active", a)

    def is_true(self, S) -> bool:
        return frozenset(S) <= self.active


def auc_pr(data: ScoredLabels) -> float:
    """Step-wise average precision; tied scores enter as one block."""
    pos = data.positive
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise ValueError("AUC-PR needs at least one positive example")
    order = np.argsort(-data.scores, kind="stable")
    s = data.scores[order]
    tp = np.cumsum(pos[order])
    # last index of each block of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp_end = tp[ends]
    precision = tp_end / (ends + 1)
    gained = np.diff(np.r_[0, tp_end])
    return float((precision * gained).sum() / n_pos)


def auc_roc(data: ScoredLabels) -> float:
    """P(score of a positive > score of a negative) + half the tie probability."""
    pos = data.positive
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC-ROC needs both classes")
    # midranks handle ties
    order = np.argsort(data.scores, kind="stable")
    s = data.scores[order]
    ranks = np.empty(len(s))
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    for a, b in zip(starts, ends):
        ranks[a:b] = (a + b + 1) / 2.0
    r = np.empty(len(s))
    r[order] = ranks
    u = r[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _confusion(pred, pos):
    tp = int((pred & pos).sum())
    fp = int((pred & ~pos).sum())
    fn = int((~pred & pos).sum())
    tn = int((~pred & ~pos).sum())
    return tp, fp, fn, tn


def mcc_score(tp, fp, fn, tn) -> float:
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def ppv_score(tp, fp) -> float:
    return tp / (tp + fp) if tp + fp else 0.0


def _mcc_key(tp, fp, fn, tn):
    # (sign(mcc) * num^2, denom): monotone in mcc, compared exactly
    num = tp * tn - fp * fn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return (0, 1) if denom == 0 else (num * abs(num), denom)


def _gt(a, b) -> bool:
    return a[0] * b[1] > b[0] * a[1]


@dataclass(frozen=True)
class Thresholded:
    threshold: float
    mcc: float
    ppv: float


def best_mcc(train_scored: ScoredLabels, eval_scored: ScoredLabels) -> Thresholded:
    """Pick the threshold maximizing training MCC (rows with score >= t are
    called positive), then report MCC and PPV on the evaluation data."""
    pos = train_scored.positive
    if pos.all() or not pos.any():
        raise ValueError("training data needs both classes")
    candidates = np.r_[-np.inf, np.unique(train_scored.scores), np.inf]
    best_t, best_key = None, None
    for t in candidates:
        key = _mcc_key(*_confusion(train_scored.scores >= t, pos))
        if best_key is None or _gt(key, best_key):
            best_t, best_key = t, key
    pred = eval_scored.scores >= best_t
    tp, fp, fn, tn = _confusion(pred, eval_scored.positive)
    return Thresholded(float(best_t), mcc_score(tp, fp, fn, tn), ppv_score(tp, fp))


def _leaf_contains(tree, S, grouping=None) -> np.ndarray:
    """Boolean per node: True for leaves whose path covers ``S``."""
    leaves, indptr, items = tree.leaf_paths()
    if grouping is not None:
        items = grouping.group_of[items]
    need = np.array(sorted(S), dtype=np.intp)
    seg = np.repeat(np.arange(len(leaves)), np.diff(indptr))
    hit = np.isin(items, need)
    # number of distinct required items present per leaf
    pairs = np.unique(np.stack([seg[hit], items[hit]]), axis=1) if hit.any() else np.empty((2, 0), int)
    found = np.bincount(pairs[0], minlength=len(leaves)) if pairs.size else np.zeros(len(leaves), int)
    out = np.zeros(tree.n_nodes, dtype=bool)
    out[leaves] = found == len(need)
    return out


def contributing_leaves(forest, S, grouping=None) -> list:
    """Per tree, the leaf ids whose decision path contains ``S``."""
    return [np.flatnonzero(_leaf_contains(t, S, grouping)) for t in forest.trees]


def conditional_prediction(forest, X, S, train_prevalence: float, grouping=None) -> np.ndarray:
    """Average over trees of the leaf label where ``S`` lies on the leaf's
    path, and of ``train_prevalence`` elsewhere."""
    if not len(S):
        raise ValueError("interaction must be nonempty")
    X = np.ascontiguousarray(X, dtype=np.float64)
    total = np.zeros(X.shape[0])
    for t in forest.trees:
        leaf = t.apply(X)
        use = _leaf_contains(t, S, grouping)[leaf]
        total += np.where(use, t.label[leaf], train_prevalence)
    return total / forest.ntree


def permutation_importance(forest, dataset, S, metric=None, seed=0, repeats: int = 5,
                           grouping=None) -> float:
    """Metric of forest predictions after independently permuting every
    column outside ``S``, averaged over ``repeats`` permutations."""
    if not len(S):
        raise ValueError("interaction must be nonempty")
    if metric is None:
        metric = auc_pr
    S = set(int(i) for i in S)
    cols = range(dataset.p)
    if grouping is None:
        permute = [j for j in cols if j not in S]
    else:
        permute = [j for j in cols if int(grouping.group_of[j]) not in S]
    if not permute:
        return metric(ScoredLabels(forest.predict_proba(dataset.features), dataset.labels))
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(repeats):
        X = dataset.features.copy()
        for j in permute:
            X[:, j] = X[rng.permutation(dataset.n), j]
        vals.append(metric(ScoredLabels(forest.predict_proba(X), dataset.labels)))
    return float(np.mean(vals))


def interaction_auc(recovered: dict, truth: TruthSet) -> float:
    """AUC-ROC of stability scores, with true subsets of the active set as
    positives. 1.0 if nothing false was recovered; NaN if nothing true was."""
    if not recovered:
        raise ValueError("no recovered interactions")
    labels = np.array([truth.is_true(S) for S in recovered], dtype=np.int8)
    if labels.all():
        return 1.0
    if not labels.any():
        return float("nan")
    return auc_roc(ScoredLabels(np.array(list(recovered.values()), dtype=float), labels))


def recovery_rate(recovered: dict, truth: TruthSet, s: int) -> float:
    """Fraction of the order-``s`` subsets of the active set recovered,
    directly or inside a larger recovered interaction."""
    k = len(truth.active)
    if not 2 <= s <= k:
        raise ValueError(f"order must lie in [2, {k}], got {s}")
    found = [frozenset(S) for S, v in recovered.items() if v > 0]
    subsets = list(combinations(sorted(truth.active), s))
    hit = sum(1 for c in subsets if any(frozenset(c) <= R for R in found))
    return hit / len(subsets)


def false_positive_weight(recovered: dict, truth: TruthSet, s: int) -> float:
    """Stability mass of false order-``s`` interactions over all order-``s``
    stability mass; NaN when no order-``s`` interaction was recovered."""
    total = false = 0.0
    for S, v in recovered.items():
        if len(S) != s:
            continue
        total += v
        if not truth.is_true(S):
            false += v
    if total == 0:
        return float("nan")
    return false / total
