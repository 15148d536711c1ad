"""Feature-weighted random forests: bagged weighted-CART trees."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._random import derive_seed
from .data import Dataset
from .tree import (DecisionTree, TreeParams, _grow, check_weights, dense_ranks, integer_weights,
                   tree_importance)

FOREST_FORMAT = "irf-forest"
FOREST_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    ntree: int = 500
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = 0

    def __post_init__(self):
        if self.ntree < 1:
            raise ValueError("ntree must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls(ntree=d["ntree"], tree=TreeParams(**d["tree"]), seed=d["seed"])


class Forest:
    def __init__(self, trees, multiplicities, feature_names, params: ForestParams):
        self.trees = list(trees)
        self.multiplicities = np.asarray(multiplicities, dtype=np.int32)
        self.feature_names = tuple(feature_names)
        self.params = params
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        p = self.trees[0].n_features
        if any(t.n_features != p for t in self.trees) or len(self.feature_names) != p:
            raise ValueError("trees disagree on the number of features")
        if self.multiplicities.shape[0] != len(self.trees):
            raise ValueError("need one multiplicity vector per tree")

    @property
    def ntree(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def _check_X(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"expected a matrix with {self.p} columns, got shape {X.shape}")
        return X

    def apply(self, X) -> np.ndarray:
        """Leaf ids, one column per tree."""
        X = self._check_X(X)
        return np.stack([t.apply(X) for t in self.trees], axis=1)

    def predict_proba(self, X) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        X = self._check_X(X)
        votes = np.zeros(X.shape[0])
        for t in self.trees:
            votes += t.predict(X)
        return votes / self.ntree

    def oob_proba(self, dataset: Dataset) -> np.ndarray:
        """Class-1 vote fraction over the trees for which each training row
        is out of bag; NaN for rows that are in-bag everywhere."""
        X = self._check_X(dataset.features)
        if self.multiplicities.shape[1] != dataset.n:
            raise ValueError("dataset is not the forest's training data")
        votes = np.zeros(dataset.n)
        n_oob = np.zeros(dataset.n)
        for t, mult in zip(self.trees, self.multiplicities):
            oob = mult == 0
            votes[oob] += t.predict(X[oob])
            n_oob[oob] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n_oob > 0, votes / np.maximum(n_oob, 1), np.nan)

    def oob_error(self, dataset: Dataset) -> float:
        """Out-of-bag misclassification rate on the training data; rows that
        are in-bag for every tree are skipped."""
        proba = self.oob_proba(dataset)
        seen = ~np.isnan(proba)
        if not seen.any():
            return float("nan")
        pred = (proba[seen] > 0.5).astype(np.int8)
        return float((pred != dataset.labels[seen]).mean())

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "params": self.params.to_dict(),
            "feature_names": list(self.feature_names),
            "multiplicities": self.multiplicities.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("format") != FOREST_FORMAT or d.get("version") != FOREST_VERSION:
            raise ValueError("unsupported forest format or version")
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], d["multiplicities"],
                   d["feature_names"], ForestParams.from_dict(d["params"]))

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def fit(dataset: Dataset, weights, params: ForestParams, threads: int = 1) -> Forest:
    """Grow ``params.ntree`` trees, each on its own bootstrap of ``dataset``.

    Tree ``t`` draws its bootstrap and its feature samples from a stream
    seeded by ``(params.seed, t)``, so results do not depend on ``threads``.
    """
    n, p = dataset.n, dataset.p
    if n < 2:
        raise ValueError("need at least two rows to fit a forest")
    wint = integer_weights(check_weights(weights, p))
    XT = np.ascontiguousarray(dataset.features.T)
    RT = dense_ranks(XT)
    y = np.ascontiguousarray(dataset.labels, dtype=np.int8)
    mtry = params.tree.resolve_mtry(p)

    def one(t):
        bitgen = np.random.PCG64(derive_seed(params.seed, t))
        rows = np.random.Generator(bitgen).integers(0, n, size=n)
        counts = np.bincount(rows, minlength=n).astype(np.int32)
        return _grow(XT, RT, y, counts, wint, mtry, params.tree, bitgen), counts

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grown = list(pool.map(one, range(params.ntree)))
    else:
        grown = [one(t) for t in range(params.ntree)]
    return Forest([g[0] for g in grown], np.stack([g[1] for g in grown]),
                  dataset.feature_names, params)


def importance(forest: Forest) -> np.ndarray:
    """Mean over trees of per-tree Gini importance."""
    total = np.zeros(forest.p)
    for t in forest.trees:
        total += tree_importance(t)
    return total / forest.ntree
