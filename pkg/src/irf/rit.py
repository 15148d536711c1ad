"""Random intersection trees over binary transactions.

A transaction is an item set (feature or group indices) with a 0/1 label.
Each intersection tree starts from a randomly drawn class-C transaction and
intersects it, level by level, with further random class-C transactions;
the sets still nonempty at the deepest level are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Interaction = tuple  # sorted, duplicate-free tuple of ints


def as_interaction(items) -> Interaction:
    out = tuple(sorted({int(i) for i in items}))
    if not out:
        raise ValueError("an interaction must be nonempty")
    return out


@dataclass(frozen=True)
class Transaction:
    items: frozenset
    label: int

    def __post_init__(self):
        object.__setattr__(self, "items", frozenset(int(i) for i in self.items))
        if self.label not in (0, 1):
            raise ValueError("transaction label must be 0 or 1")


@dataclass(frozen=True)
class RitParams:
    M: int = 500
    D: int = 5
    n_child: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.D < 1 or self.n_child < 1:
            raise ValueError("M, D and n_child must all be >= 1")


class TransactionSet:
    """Transactions in CSR form, each with a repeat count.

    A set with counts ``c`` behaves exactly like the list in which every
    transaction is written out ``c`` times, in order.
    """

    def __init__(self, indptr, items, labels, counts=None):
        self.indptr = np.asarray(indptr, dtype=np.intp)
        self.items = np.asarray(items, dtype=np.intp)
        self.labels = np.asarray(labels, dtype=np.int8)
        n = len(self.labels)
        self.counts = np.ones(n, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
        if len(self.indptr) != n + 1 or len(self.counts) != n:
            raise ValueError("inconsistent transaction arrays")
        self._sets: dict[int, frozenset] = {}

    @classmethod
    def from_transactions(cls, transactions) -> "TransactionSet":
        transactions = list(transactions)
        indptr = [0]
        items = []
        for t in transactions:
            items.extend(sorted(t.items))
            indptr.append(len(items))
        return cls(indptr, items, [t.label for t in transactions])

    def __len__(self) -> int:
        return len(self.labels)

    def itemset(self, i: int) -> frozenset:
        s = self._sets.get(i)
        if s is None:
            s = frozenset(self.items[self.indptr[i]:self.indptr[i + 1]].tolist())
            self._sets[i] = s
        return s

    def materialize(self) -> list[Transaction]:
        out = []
        for i in range(len(self)):
            t = Transaction(self.itemset(i), int(self.labels[i]))
            out.extend([t] * int(self.counts[i]))
        return out

    def class_pool(self, class_label: int) -> np.ndarray:
        """Transaction indices of class ``class_label``, each repeated by its
        count, in order."""
        idx = np.flatnonzero(self.labels == class_label)
        return np.repeat(idx, self.counts[idx])


def _as_set(transactions) -> TransactionSet:
    if isinstance(transactions, TransactionSet):
        return transactions
    return TransactionSet.from_transactions(transactions)


def prevalence(S, transactions, class_label: int) -> float:
    """Fraction of class-C transactions whose item set contains ``S``."""
    ts = _as_set(transactions)
    S = frozenset(int(i) for i in S)
    mask = ts.labels == class_label
    total = int(ts.counts[mask].sum())
    if total == 0:
        raise ValueError(f"no transactions with label {class_label}")
    hit = 0
    for i in np.flatnonzero(mask):
        if S <= ts.itemset(int(i)):
            hit += int(ts.counts[i])
    return hit / total


def n_nodes(params: RitParams) -> int:
    return sum(params.n_child**level for level in range(params.D + 1))


def run(transactions, class_label: int, params: RitParams) -> set:
    """Interactions surviving to depth ``D`` in any of ``M`` intersection trees.

    Nodes are numbered breadth-first, node ``j`` having parent
    ``(j - 1) // n_child``; every node draws one class-C transaction
    uniformly. All draws are taken up front as an ``(M, J)`` index matrix
    so pruning empty subtrees does not shift the random stream.
    """
    ts = _as_set(transactions)
    pool = ts.class_pool(class_label)
    if len(pool) == 0:
        raise ValueError(f"no transactions with label {class_label}")
    J = n_nodes(params)
    first_leaf = J - params.n_child**params.D
    draws = pool[np.random.default_rng(params.seed).integers(0, len(pool), size=(params.M, J))]
    empty = frozenset()
    out = set()
    nc = params.n_child
    for row in draws.tolist():
        sets = [ts.itemset(row[0])]
        for j in range(1, J):
            parent = sets[(j - 1) // nc]
            sets.append(parent & ts.itemset(row[j]) if parent else empty)
        for s in sets[first_leaf:]:
            if s:
                out.add(tuple(sorted(s)))
    return out


def filter_interactions(candidates, transactions, theta1: float, theta0: float) -> set:
    """Keep candidates with class-1 prevalence >= theta1 and class-0
    prevalence <= theta0."""
    if not (0.0 <= theta0 <= 1.0 and 0.0 <= theta1 <= 1.0):
        raise ValueError(f"thresholds must lie in [0, 1], got {theta0}, {theta1}")
    ts = _as_set(transactions)
    return {
        S for S in candidates
        if prevalence(S, ts, 1) >= theta1 and prevalence(S, ts, 0) <= theta0
    }


def format_transactions(transactions) -> str:
    """``label:idx,idx,...`` per line; an empty item set leaves the tail empty."""
    lines = []
    for t in transactions:
        lines.append(f"{t.label}:" + ",".join(str(i) for i in sorted(t.items)))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_transactions(text: str) -> list[Transaction]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        label, sep, tail = line.partition(":")
        if not sep or label not in ("0", "1"):
            raise ValueError(f"line {lineno}: expected 'label:idx,idx,...'")
        try:
            items = [int(tok) for tok in tail.split(",") if tok.strip()]
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer item") from None
        if any(i < 0 for i in items):
            raise ValueError(f"line {lineno}: negative item index")
        out.append(Transaction(frozenset(items), int(label)))
    return out
