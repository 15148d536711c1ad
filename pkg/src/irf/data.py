"""Datasets: CSV ingestion, response binarization, splitting, resampling and
feature grouping."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataError(f"dataset must have at least one row and one feature, got {n}x{p}")
        if not np.isfinite(X).all():
            raise DataError("features contain NaN or infinite values")
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got shape {y.shape}")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DataError(f"expected {p} feature names, got {len(names)}")
        if len(set(names)) != p:
            raise DataError("feature names must be distinct")
        X = X.copy()
        X.flags.writeable = False
        y = y.astype(np.int8)
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.feature_names, self.labels[rows])

    def with_columns(self, columns) -> "Dataset":
        columns = list(columns)
        return Dataset(
            self.features[:, columns],
            tuple(self.feature_names[c] for c in columns),
            self.labels,
        )


@dataclass(frozen=True)
class FeatureGrouping:
    group_of: np.ndarray
    group_names: tuple[str, ...]

    def __post_init__(self):
        g = np.asarray(self.group_of, dtype=np.intp)
        names = tuple(self.group_names)
        if g.ndim != 1 or len(g) == 0:
            raise DataError("grouping must map at least one feature")
        if len(set(names)) != len(names):
            raise DataError("group names must be unique")
        if g.min() < 0 or set(np.unique(g)) != set(range(len(names))):
            raise DataError("group indices must be contiguous from 0")
        g = g.copy()
        g.flags.writeable = False
        object.__setattr__(self, "group_of", g)
        object.__setattr__(self, "group_names", names)

    @classmethod
    def identity(cls, feature_names) -> "FeatureGrouping":
        return cls(np.arange(len(feature_names)), tuple(feature_names))

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def is_identity(self) -> bool:
        return self.n_groups == len(self.group_of) and bool(
            (self.group_of == np.arange(len(self.group_of))).all()
        )

    def map_items(self, items) -> tuple[int, ...]:
        """Feature indices to the sorted, duplicate-free set of their groups."""
        return tuple(sorted({int(self.group_of[i]) for i in items}))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie strictly between 0 and 1")


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell at ({row},{col}): {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-numeric cell at ({row},{col}): {text!r}")
    return value


def load_csv(path, response_column: str, id_col: bool = False) -> Dataset:
    """Read a header-first CSV into a :class:`Dataset`.

    Every column except ``response_column`` (and the leading id column when
    ``id_col`` is set) becomes a feature, in header order. Row and column
    numbers in error messages are 1-based data rows and 0-based columns.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if any(h == "" for h in header):
            raise DataError("missing column name in header")
        seen = set()
        for h in header:
            if h in seen:
                raise DataError(f"duplicate column name: {h}")
            seen.add(h)
        if response_column not in header:
            raise DataError(f"response column not found: {response_column}")
        first = 1 if id_col else 0
        resp = header.index(response_column)
        if resp < first:
            raise DataError("response column cannot be the id column")
        feat_cols = [j for j in range(first, len(header)) if j != resp]
        if not feat_cols:
            raise DataError("no feature columns")

        rows, labels = [], []
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"row {r} has {len(record)} cells, expected {len(header)}")
            yv = _parse_cell(record[resp], r, resp)
            if yv not in (0.0, 1.0):
                raise DataError(f"response value outside {{0,1}} at row {r}: {record[resp]!r}")
            rows.append([_parse_cell(record[j], r, j) for j in feat_cols])
            labels.append(int(yv))
    if not rows:
        raise DataError(f"no data rows in {path}")
    return Dataset(np.array(rows, dtype=np.float64), tuple(header[j] for j in feat_cols),
                   np.array(labels, dtype=np.int8))


def write_csv(dataset: Dataset, path, response_column: str = "y") -> None:
    if response_column in dataset.feature_names:
        raise DataError(f"response column name clashes with a feature: {response_column}")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*dataset.feature_names, response_column])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def binarize_response(values, low: float, high: float):
    """Threshold a continuous response; rows strictly between are dropped.

    Returns ``(labels, mask)`` where ``labels`` covers only rows kept by
    ``mask``.
    """
    if not low < high:
        raise DataError(f"need low < high, got low={low}, high={high}")
    v = np.asarray(values, dtype=np.float64)
    hi = v >= high
    mask = hi | (v <= low)
    return hi[mask].astype(np.int8), mask


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    n = dataset.n
    rng = np.random.default_rng(spec.seed)
    if spec.stratify:
        train = []
        for c in (0, 1):
            idx = np.flatnonzero(dataset.labels == c)
            idx = idx[rng.permutation(len(idx))]
            train.append(idx[: int(round(spec.train_fraction * len(idx)))])
        train_idx = np.sort(np.concatenate(train))
    else:
        n_train = int(round(spec.train_fraction * n))
        train_idx = np.sort(rng.permutation(n)[:n_train])
    if len(train_idx) == 0 or len(train_idx) == n:
        raise DataError(
            f"train_fraction={spec.train_fraction} leaves an empty partition for n={n}"
        )
    test_mask = np.ones(n, dtype=bool)
    test_mask[train_idx] = False
    return dataset.take(train_idx), dataset.take(np.flatnonzero(test_mask))


def bootstrap_indices(n: int, seed) -> np.ndarray:
    if n < 1:
        raise DataError("cannot resample an empty dataset")
    return np.random.default_rng(seed).integers(0, n, size=n)


def bootstrap(dataset: Dataset, seed) -> Dataset:
    return dataset.take(bootstrap_indices(dataset.n, seed))


def load_grouping(path, feature_names) -> FeatureGrouping:
    """Read a two-column ``feature,group`` CSV.

    Groups are numbered in order of first appearance along ``feature_names``,
    so an identity file yields group index == feature index.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    mapping = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["feature", "group"]:
            raise DataError("grouping file needs a 'feature,group' header")
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) < 2:
                raise DataError(f"grouping row {r} needs two cells")
            feat, group = record[0].strip(), record[1].strip()
            if feat in mapping:
                raise DataError(f"duplicate grouping row for feature: {feat}")
            mapping[feat] = group
    known = set(feature_names)
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise DataError(f"unknown features in grouping: {', '.join(unknown)}")
    missing = [f for f in feature_names if f not in mapping]
    if missing:
        raise DataError(f"features missing from grouping: {', '.join(missing)}")
    names, index, group_of = [], {}, []
    for f in feature_names:
        g = mapping[f]
        if g not in index:
            index[g] = len(names)
            names.append(g)
        group_of.append(index[g])
    return FeatureGrouping(np.array(group_of), tuple(names))
