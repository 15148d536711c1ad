"""Weighted-CART classification trees.

At every node a subset of ``mtry`` features is drawn without replacement
with probability proportional to a per-feature weight, and the split
maximizing the weighted Gini decrease among them is taken. Trees grow until
nodes are pure unless a depth or leaf-size limit intervenes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _pykernels
from ._backend import kernels
from ._random import bit_generator

TREE_FORMAT = "irf-tree"
TREE_VERSION = 1

# integer weight resolution used by the feature sampler
WEIGHT_SCALE = 2**32


@dataclass(frozen=True)
class TreeParams:
    mtry: int | None = None
    min_node_size: int = 1
    max_depth: int | None = None

    def __post_init__(self):
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be a positive integer")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer")

    def resolve_mtry(self, p: int) -> int:
        if self.mtry is None:
            return max(1, math.isqrt(p))
        if self.mtry > p:
            raise ValueError(f"mtry={self.mtry} exceeds the number of features p={p}")
        return self.mtry


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    decrease: float


def check_weights(weights, p: int | None = None) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or (p is not None and len(w) != p):
        raise ValueError(f"weight vector must have length {p}")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    if not (w > 0).any():
        raise ValueError("all feature weights are zero")
    return w


def integer_weights(weights) -> np.ndarray:
    """Scale weights to integers, keeping every positive weight positive."""
    w = check_weights(weights)
    out = np.floor(w / w.max() * WEIGHT_SCALE).astype(np.int64)
    out[(w > 0) & (out == 0)] = 1
    return out


def gini(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total < 1:
        raise ValueError("gini impurity of an empty node")
    prop = c / total
    return float(1.0 - (prop * prop).sum())


def sample_features(weights, mtry: int, rng) -> np.ndarray:
    """Draw up to ``mtry`` distinct features, each draw proportional to weight
    among those not yet drawn. Returned indices are ascending."""
    return kernels.sample_features(integer_weights(weights), int(mtry), bit_generator(rng))


def best_split(X, y, candidate_features, sample_weight=None, min_leaf: int = 1) -> Split | None:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.ones(len(y), dtype=np.int64) if sample_weight is None else np.asarray(sample_weight, dtype=np.int64)
    c1 = int((w * y).sum())
    c0 = int(w.sum()) - c1
    N = c0 + c1
    if N < 1:
        return None
    parent_proxy = float(c0 * c0 + c1 * c1) / float(N)
    best = None
    for f in sorted(int(f) for f in candidate_features):
        found = _pykernels.split_scan(X[:, f], y, w, c0, c1, min_leaf)
        if found is not None and (best is None or _pykernels.better(found[0], found[1], best[0], best[1])):
            best = (*found, f)
    if best is None:
        return None
    P, Q, thr, f = best
    return Split(f, thr, max((float(P) / float(Q) - parent_proxy) / float(N), 0.0))


class DecisionTree:
    """A fitted tree stored as preorder node arrays.

    Internal nodes have ``feature >= 0`` and route ``x[feature] <= threshold``
    to ``left``. ``counts[j]`` holds the class-0 and class-1 training counts
    (bootstrap multiplicity included) reaching node ``j``.
    """

    def __init__(self, feature, threshold, left, right, counts, decrease, n_features: int):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.counts = np.asarray(counts, dtype=np.int64).reshape(-1, 2)
        self.decrease = np.asarray(decrease, dtype=np.float64)
        self.n_features = int(n_features)
        for a in (self.feature, self.threshold, self.left, self.right, self.counts, self.decrease):
            a.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def label(self) -> np.ndarray:
        """Majority label per node; equal counts resolve to 0."""
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.int8)

    @property
    def n_train(self) -> int:
        return int(self.counts[0].sum())

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X) -> np.ndarray:
        return self.label[self.apply(X)]

    @cached_property
    def _paths(self):
        return kernels.leaf_paths(self.feature, self.left, self.right, self.n_features)

    def leaf_paths(self):
        """``(leaves, indptr, items)``: unique path features per leaf, CSR."""
        return self._paths

    def to_dict(self) -> dict:
        nodes = []
        label = self.label
        for j in range(self.n_nodes):
            c = [int(self.counts[j, 0]), int(self.counts[j, 1])]
            if self.feature[j] >= 0:
                nodes.append({
                    "id": j,
                    "feature": int(self.feature[j]),
                    "threshold": float(self.threshold[j]),
                    "left": int(self.left[j]),
                    "right": int(self.right[j]),
                    "counts": c,
                    "decrease": float(self.decrease[j]),
                })
            else:
                nodes.append({"id": j, "label": int(label[j]), "counts": c})
        return {"format": TREE_FORMAT, "version": TREE_VERSION,
                "n_features": self.n_features, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        if d.get("format") != TREE_FORMAT or d.get("version") != TREE_VERSION:
            raise ValueError("unsupported tree format or version")
        nodes = d["nodes"]
        m = len(nodes)
        feature = np.full(m, -1, dtype=np.int32)
        threshold = np.zeros(m)
        left = np.full(m, -1, dtype=np.int32)
        right = np.full(m, -1, dtype=np.int32)
        counts = np.zeros((m, 2), dtype=np.int64)
        decrease = np.zeros(m)
        for j, node in enumerate(nodes):
            if node["id"] != j:
                raise ValueError("tree nodes must be listed in preorder id order")
            counts[j] = node["counts"]
            if "feature" in node:
                feature[j] = node["feature"]
                threshold[j] = node["threshold"]
                left[j] = node["left"]
                right[j] = node["right"]
                decrease[j] = node["decrease"]
        tree = cls(feature, threshold, left, right, counts, decrease, d["n_features"])
        tree.validate()
        return tree

    def validate(self) -> None:
        """Check the arrays describe a well-formed binary tree."""
        m = self.n_nodes
        if m == 0:
            raise ValueError("tree has no nodes")
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        for j in range(m):
            if self.feature[j] >= 0:
                if self.feature[j] >= self.n_features:
                    raise ValueError(f"node {j} splits on unknown feature")
                for child in (self.left[j], self.right[j]):
                    if not j < child < m or seen[child]:
                        raise ValueError(f"node {j} has an invalid child {child}")
                    seen[child] = True
                if (self.counts[self.left[j]] + self.counts[self.right[j]] != self.counts[j]).any():
                    raise ValueError(f"child counts do not sum at node {j}")
                if self.decrease[j] < 0:
                    raise ValueError(f"negative impurity decrease at node {j}")
        if not seen.all():
            raise ValueError("unreachable nodes in tree")


def grow(X, y, weights, params: TreeParams, seed, counts=None) -> DecisionTree:
    """Fit one tree on the rows of ``X`` weighted by integer ``counts``
    (default: every row once)."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if n < 1:
        raise ValueError("cannot grow a tree on empty data")
    y = np.asarray(y, dtype=np.int8)
    counts = np.ones(n, dtype=np.int32) if counts is None else np.asarray(counts, dtype=np.int32)
    wint = integer_weights(check_weights(weights, p))
    XT = np.ascontiguousarray(X.T)
    return _grow(XT, dense_ranks(XT), y, counts, wint, params.resolve_mtry(p),
                 params, bit_generator(seed))


def dense_ranks(XT) -> np.ndarray:
    """Per row of ``XT``, the rank of each value among that row's distinct
    values (ties share a rank)."""
    RT = np.empty(XT.shape, dtype=np.int32)
    for j, row in enumerate(XT):
        RT[j] = np.unique(row, return_inverse=True)[1].reshape(-1)
    return RT


def _grow(XT, RT, y, counts, wint, mtry, params, bitgen) -> DecisionTree:
    max_depth = -1 if params.max_depth is None else params.max_depth
    feature, threshold, left, right, n0, n1, decrease = kernels.grow_tree(
        XT, RT, y, counts, wint, mtry, params.min_node_size, max_depth, bitgen)
    return DecisionTree(feature, threshold, left, right, np.stack([n0, n1], axis=1),
                        decrease, XT.shape[0])


def grow_dataset(dataset, weights, params: TreeParams, seed) -> DecisionTree:
    return grow(dataset.features, dataset.labels, weights, params, seed)


def decision_path(tree: DecisionTree, leaf_id: int) -> frozenset:
    if not 0 <= leaf_id < tree.n_nodes or tree.feature[leaf_id] >= 0:
        raise ValueError(f"node {leaf_id} is not a leaf")
    leaves, indptr, items = tree.leaf_paths()
    k = int(np.searchsorted(leaves, leaf_id))
    return frozenset(int(i) for i in items[indptr[k]:indptr[k + 1]])


def tree_importance(tree: DecisionTree) -> np.ndarray:
    """Per-feature sum of impurity decreases weighted by the fraction of
    training rows reaching each split."""
    internal = tree.feature >= 0
    if not internal.any():
        return np.zeros(tree.n_features)
    frac = tree.counts[internal].sum(axis=1) / tree.n_train
    return np.bincount(tree.feature[internal], weights=frac * tree.decrease[internal],
                       minlength=tree.n_features)
