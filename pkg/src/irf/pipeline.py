"""Iterative random forests: re-weighted forests, generalized RIT over
decision paths, and bootstrap stability scores."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import forest as rf
from . import rit
from ._random import derive_seed
from .data import Dataset, FeatureGrouping, bootstrap_indices
from .forest import Forest, ForestParams
from .metrics import ScoredLabels, auc_pr
from .rit import RitParams, Transaction, TransactionSet

log = logging.getLogger(__name__)

RESULT_FORMAT = "irf-result"
RESULT_VERSION = 1

# stream ids for derive_seed
_ITERATION, _RESAMPLE, _BOOT_FOREST, _BOOT_RIT, _FOLDS = 1, 2, 3, 4, 5


class IrfError(RuntimeError):
    pass


@dataclass(frozen=True)
class IrfParams:
    """Settings for one iRF run.

    ``seed`` drives every random stream of the run; the ``seed`` fields of
    the nested forest and RIT parameters are overridden by derived seeds.
    """

    K: int = 5
    B: int = 20
    forest: ForestParams = field(default_factory=ForestParams)
    rit: RitParams = field(default_factory=RitParams)
    class_of_interest: int = 1
    grouping: FeatureGrouping | None = None
    seed: int = 0
    weight_floor: float = 0.0

    def __post_init__(self):
        if self.K < 1 or self.B < 1:
            raise ValueError("K and B must be >= 1")
        if self.class_of_interest not in (0, 1):
            raise ValueError("class_of_interest must be 0 or 1")
        if self.weight_floor < 0:
            raise ValueError("weight_floor must be nonnegative")

    def to_dict(self) -> dict:
        d = {
            "K": self.K,
            "B": self.B,
            "forest": self.forest.to_dict(),
            "rit": dataclasses.asdict(self.rit),
            "class_of_interest": self.class_of_interest,
            "seed": self.seed,
            "weight_floor": self.weight_floor,
        }
        d["grouping"] = None if self.grouping is None else list(self.grouping.group_names)
        return d


@dataclass
class IrfResult:
    weights_per_iteration: list
    final_forest: Forest
    per_bootstrap_interactions: list
    stability: dict
    group_names: tuple
    params: IrfParams
    forests: list = field(default_factory=list, repr=False)
    test_scores: np.ndarray | None = None

    def ranked(self) -> list:
        """Interactions by stability, then order (both descending), then names."""
        return sorted(
            self.stability.items(),
            key=lambda kv: (-kv[1], -len(kv[0]), [self.group_names[i] for i in kv[0]]),
        )


def _grouping(params: IrfParams, dataset: Dataset) -> FeatureGrouping:
    g = params.grouping
    if g is None:
        return FeatureGrouping.identity(dataset.feature_names)
    if len(g.group_of) != dataset.p:
        raise ValueError("grouping does not cover the dataset's features")
    return g


def forest_transactions(forest: Forest, grouping: FeatureGrouping | None = None) -> TransactionSet:
    """Decision-path transactions of every leaf, repeated by leaf size.

    Leaf size counts the tree's own in-bag rows with bootstrap multiplicity,
    so the set stands for one transaction per (training row, tree) pair.
    Items are mapped through ``grouping`` and de-duplicated.
    """
    indptrs, items, labels, counts = [], [], [], []
    offset = 0
    for t in forest.trees:
        leaves, indptr, its = t.leaf_paths()
        indptrs.append(indptr[:-1] + offset)
        offset += indptr[-1]
        items.append(its)
        labels.append(t.label[leaves])
        counts.append(t.counts[leaves].sum(axis=1))
    indptr = np.concatenate([*indptrs, [offset]])
    items = np.concatenate(items)
    labels = np.concatenate(labels)
    counts = np.concatenate(counts)
    if grouping is not None and not grouping.is_identity:
        n_leaves = len(labels)
        seg = np.repeat(np.arange(n_leaves), np.diff(indptr))
        g = grouping.group_of[items]
        order = np.lexsort((g, seg))
        seg, g = seg[order], g[order]
        keep = np.ones(len(g), dtype=bool)
        keep[1:] = (seg[1:] != seg[:-1]) | (g[1:] != g[:-1])
        seg, items = seg[keep], g[keep]
        indptr = np.concatenate([[0], np.cumsum(np.bincount(seg, minlength=n_leaves))])
    return TransactionSet(indptr, items, labels, counts)


def extract_transactions(forest: Forest, grouping: FeatureGrouping | None = None) -> list[Transaction]:
    """One transaction per (in-bag row, tree) pair, written out in full."""
    return forest_transactions(forest, grouping).materialize()


def next_weights(forest: Forest, floor: float = 0.0) -> np.ndarray:
    w = rf.importance(forest)
    return w + floor if floor else w


def iterate(train: Dataset, K: int, params: IrfParams, threads: int = 1):
    """Fit ``RF(w^(1)), ..., RF(w^(K))`` on the full training data.

    Returns ``(weights, forests)`` with ``K + 1`` weight vectors.
    """
    p = train.p
    weights = [np.full(p, 1.0 / p)]
    forests = []
    for k in range(1, K + 1):
        fp = dataclasses.replace(params.forest, seed=derive_seed(params.seed, _ITERATION, k))
        forest = rf.fit(train, weights[-1], fp, threads=threads)
        w = next_weights(forest, params.weight_floor)
        if k < K and not (w > 0).any():
            raise IrfError(f"iteration {k}: feature importance is zero for every feature")
        forests.append(forest)
        weights.append(w)
        log.debug("iteration %d done, %d features with positive weight", k, int((w > 0).sum()))
    return weights, forests


def bootstrap_stage(train: Dataset, weights, params: IrfParams, threads: int = 1) -> list:
    """Per outer bootstrap, fit ``RF(weights)`` and run RIT on its leaves."""
    grouping = _grouping(params, train)
    out = []
    for b in range(params.B):
        rows = bootstrap_indices(train.n, derive_seed(params.seed, _RESAMPLE, b))
        fp = dataclasses.replace(params.forest, seed=derive_seed(params.seed, _BOOT_FOREST, b))
        forest = rf.fit(train.take(rows), weights, fp, threads=threads)
        ts = forest_transactions(forest, grouping)
        rp = dataclasses.replace(params.rit, seed=derive_seed(params.seed, _BOOT_RIT, b))
        if (ts.labels == params.class_of_interest).any():
            found = rit.run(ts, params.class_of_interest, rp)
        else:
            found = set()
        out.append(found)
    return out


def stability_scores(per_bootstrap: list) -> dict:
    B = len(per_bootstrap)
    tally: dict = {}
    for found in per_bootstrap:
        for S in found:
            tally[S] = tally.get(S, 0) + 1
    return {S: c / B for S, c in tally.items()}


def _check_train(train: Dataset) -> None:
    if len(np.unique(train.labels)) < 2:
        raise IrfError("training data contains a single class")


def fit(train: Dataset, params: IrfParams, threads: int = 1, test: Dataset | None = None) -> IrfResult:
    _check_train(train)
    grouping = _grouping(params, train)
    weights, forests = iterate(train, params.K, params, threads)
    per_boot = bootstrap_stage(train, weights[params.K - 1], params, threads)
    result = IrfResult(
        weights_per_iteration=weights,
        final_forest=forests[-1],
        per_bootstrap_interactions=per_boot,
        stability=stability_scores(per_boot),
        group_names=grouping.group_names,
        params=params,
        forests=forests,
    )
    if test is not None:
        result.test_scores = forests[-1].predict_proba(test.features)
    return result


def _folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Stratified fold id per row."""
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.intp)
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = np.arange(len(idx)) % folds
    return fold_of


def cv_scores(train: Dataset, k_max: int, folds: int, params: IrfParams, threads: int = 1) -> np.ndarray:
    """Mean held-out AUC-PR of the iteration-k forest, for k = 1..k_max."""
    if folds < 2:
        raise ValueError("need at least two folds")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    fold_of = _folds(train.labels, folds, derive_seed(params.seed, _FOLDS))
    scores = np.zeros((folds, k_max))
    for f in range(folds):
        inner, held = train.take(np.flatnonzero(fold_of != f)), train.take(np.flatnonzero(fold_of == f))
        for part in (inner, held):
            if len(np.unique(part.labels)) < 2:
                raise IrfError(f"fold {f} contains a single class")
        _, forests = iterate(inner, k_max, dataclasses.replace(params, seed=derive_seed(params.seed, _FOLDS, f)), threads)
        for k, forest in enumerate(forests):
            scores[f, k] = auc_pr(ScoredLabels(forest.predict_proba(held.features), held.labels))
    return scores.mean(axis=0)


def select_k(train: Dataset, k_max: int, folds: int, params: IrfParams, threads: int = 1,
             tol: float = 0.005) -> int:
    """Smallest K whose cross-validated AUC-PR is within ``tol`` of the best."""
    if k_max == 1:
        return 1
    means = cv_scores(train, k_max, folds, params, threads)
    return int(np.flatnonzero(means >= means.max() - tol)[0]) + 1


def prune_display(stability: dict, cutoff: float = 0.5) -> dict:
    """Drop interactions that are strict subsets of another interaction
    whose stability is at least ``cutoff``."""
    strong = [frozenset(S) for S, v in stability.items() if v >= cutoff]
    out = {}
    for S, v in stability.items():
        s = frozenset(S)
        if not any(s < other for other in strong):
            out[S] = v
    return out
