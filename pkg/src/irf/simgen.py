"""Generative models for the Boolean-rule simulations.

Features are heavy-tailed (standard Cauchy, or elliptical multivariate
Cauchy when correlated); responses come from OR / AND / XOR rules over a
set of active features, optionally mixed, with label-swap noise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._random import derive_seed
from .data import Dataset
from .metrics import TruthSet


class RuleKind(str, Enum):
    OR = "OR"
    AND = "AND"
    XOR = "XOR"
    MIXTURE = "MIXTURE"


class CovKind(str, Enum):
    INDEPENDENT = "INDEPENDENT"
    DECAYING = "DECAYING"
    BLOCK = "BLOCK"


class NoiseKind(str, Enum):
    SWAP_UNIFORM = "SWAP_UNIFORM"
    SWAP_BALANCED = "SWAP_BALANCED"


@dataclass(frozen=True)
class RuleSpec:
    kind: RuleKind
    active: tuple = ()
    threshold: float = 0.0
    # MIXTURE only: rows use components[0] with probability pi
    components: tuple = ()
    pi: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        object.__setattr__(self, "active", tuple(int(a) for a in self.active))
        if self.kind is RuleKind.MIXTURE:
            if len(self.components) != 2:
                raise ValueError("a mixture needs exactly two component rules")
            if any(c.kind is RuleKind.MIXTURE for c in self.components):
                raise ValueError("mixture components cannot be mixtures")
            if not 0.0 < self.pi < 1.0:
                raise ValueError("mixture pi must lie in (0, 1)")
        elif not self.active:
            raise ValueError("rule needs at least one active feature")

    @property
    def all_active(self) -> tuple:
        if self.kind is RuleKind.MIXTURE:
            return tuple(sorted(set(self.components[0].active) | set(self.components[1].active)))
        return self.active


@dataclass(frozen=True)
class CovSpec:
    kind: CovKind = CovKind.INDEPENDENT
    rho: float = 0.0
    block_size: int = 10

    def __post_init__(self):
        object.__setattr__(self, "kind", CovKind(self.kind))
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    def scale_matrix(self, p: int) -> np.ndarray:
        if self.kind is CovKind.DECAYING:
            i = np.arange(p)
            return self.rho ** np.abs(i[:, None] - i[None, :])
        if self.kind is CovKind.BLOCK:
            block = np.arange(p) // self.block_size
            S = np.where(block[:, None] == block[None, :], self.rho, 0.0)
            np.fill_diagonal(S, 1.0)
            return S
        return np.eye(p)


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.SWAP_UNIFORM
    fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not 0.0 <= self.fraction < 0.5:
            raise ValueError("noise fraction must lie in [0, 0.5)")


def gen_features(n: int, p: int, cov: CovSpec, seed) -> np.ndarray:
    """Independent standard Cauchy columns, or ``L z / |u|`` with ``L`` the
    Cholesky factor of the scale matrix, ``z`` standard normal and ``u`` an
    independent standard normal scalar per row."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = np.random.default_rng(seed)
    if cov.kind is CovKind.INDEPENDENT:
        return rng.standard_cauchy((n, p))
    try:
        L = np.linalg.cholesky(cov.scale_matrix(p))
    except np.linalg.LinAlgError:
        raise ValueError("scale matrix is not positive definite") from None
    z = rng.standard_normal((n, p)) @ L.T
    u = np.abs(rng.standard_normal(n))
    return z / u[:, None]


def apply_rule(X, rule: RuleSpec, seed=None) -> np.ndarray:
    """Labels from ``rule``; ``seed`` only drives mixture assignment."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if any(not 0 <= a < p for a in rule.all_active):
        raise ValueError(f"active feature index out of range for p={p}")
    if rule.kind is RuleKind.MIXTURE:
        use_first = np.random.default_rng(seed).random(X.shape[0]) < rule.pi
        a = apply_rule(X, rule.components[0])
        b = apply_rule(X, rule.components[1])
        return np.where(use_first, a, b).astype(np.int8)
    above = X[:, list(rule.active)] > rule.threshold
    if rule.kind is RuleKind.OR:
        y = above.any(axis=1)
    elif rule.kind is RuleKind.AND:
        y = above.all(axis=1)
    else:
        y = above.sum(axis=1) % 2 == 1
    return y.astype(np.int8)


def add_noise(labels, spec: NoiseSpec, seed) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int8).copy()
    rng = np.random.default_rng(seed)
    if spec.fraction == 0:
        return y
    if spec.kind is NoiseKind.SWAP_UNIFORM:
        k = int(np.floor(spec.fraction * len(y)))
        idx = rng.choice(len(y), size=k, replace=False)
    else:
        ones = np.flatnonzero(y == 1)
        zeros = np.flatnonzero(y == 0)
        k = int(np.floor(spec.fraction * len(ones)))
        if k > len(zeros):
            raise ValueError(f"balanced swap needs {k} class-0 rows, only {len(zeros)} present")
        idx = np.concatenate([rng.choice(ones, size=k, replace=False),
                              rng.choice(zeros, size=k, replace=False)])
    y[idx] ^= 1
    return y


# the enhancer-data rule: Kr, Hb, D, Twi above 1.25 and Zld above 75
ENHANCER_RULE = {"kr": 1.25, "hb": 1.25, "D": 1.25, "twi": 1.25, "zld": 75.0}


def embed_rule(X, feature_names, thresholds: dict) -> np.ndarray:
    """AND of ``x[name] > threshold`` over the named columns."""
    X = np.asarray(X, dtype=np.float64)
    names = list(feature_names)
    missing = [k for k in thresholds if k not in names]
    if missing:
        raise ValueError(f"columns not found: {', '.join(missing)}")
    y = np.ones(X.shape[0], dtype=bool)
    for name, t in thresholds.items():
        y &= X[:, names.index(name)] > t
    return y.astype(np.int8)


@dataclass(frozen=True)
class Scenario:
    name: str
    train: Dataset
    test: Dataset
    truth: TruthSet
    params: dict = field(default_factory=dict)


def _names(p):
    return tuple(f"x{j + 1}" for j in range(p))


def _settings(name: str) -> dict:
    m = re.fullmatch(r"sim1-(or|and)-n(\d+)", name)
    if m:
        kind = m.group(1).upper()
        t = 3.2 if kind == "OR" else -1.0
        return dict(n=int(m.group(2)), p=50, rule=RuleSpec(kind, range(4), t), noise=0.2)
    m = re.fullmatch(r"sim1-xor-n(\d+)", name)
    if m:
        return dict(n=int(m.group(1)), p=50, rule=RuleSpec("XOR", range(4), 1.0), noise=0.2)
    m = re.fullmatch(r"sim2-xor8-noise(\d+)", name)
    if m:
        return dict(n=5000, p=100, rule=RuleSpec("XOR", range(8), 2.0), noise=int(m.group(1)) / 100)
    m = re.fullmatch(r"sim2-mixture-pi(\d+)", name)
    if m:
        rule = RuleSpec("MIXTURE", components=(RuleSpec("XOR", range(8), 2.0),
                                               RuleSpec("AND", range(8, 12), -0.5)),
                        pi=int(m.group(1)) / 100)
        return dict(n=5000, p=100, rule=rule, noise=0.1, truth=range(8),
                    extra={"and_active": list(range(8, 12))})
    m = re.fullmatch(r"sim2-corr-(decay|block)-rho(\d+)", name)
    if m:
        kind = CovKind.DECAYING if m.group(1) == "decay" else CovKind.BLOCK
        return dict(n=5000, p=100, rule=None, noise=0.0,
                    cov=CovSpec(kind, int(m.group(2)) / 100, 10))
    m = re.fullmatch(r"sim3-bigp(?:-p(\d+))?-(?:noise(\d+)|(0\.\d+))", name)
    if m:
        p = int(m.group(1) or 1000)
        noise = int(m.group(2)) / 100 if m.group(2) else float(m.group(3))
        return dict(n=500, p=p, rule=RuleSpec("AND", range(4), -1.0), noise=noise)
    raise KeyError(f"unknown scenario: {name}")


SCENARIO_EXAMPLES = (
    "sim1-or-n500", "sim1-and-n500", "sim1-xor-n1000", "sim2-xor8-noise15",
    "sim2-mixture-pi75", "sim2-corr-block-rho75", "sim3-bigp-p1000-noise20",
)

TEST_SIZE = 500


def scenario(name: str, seed: int, n_train: int | None = None, n_test: int = TEST_SIZE) -> Scenario:
    """Build a named simulation setting with a held-out test set.

    Names: ``sim1-{or,and}-n<N>``, ``sim1-xor-n<N>``, ``sim2-xor8-noise<pct>``,
    ``sim2-mixture-pi<pct>``, ``sim2-corr-{decay,block}-rho<pct>``,
    ``sim3-bigp[-p<P>]-noise<pct>`` (or ``sim3-bigp-0.2``).
    """
    s = _settings(name)
    n = s["n"] if n_train is None else n_train
    p = s["p"]
    cov = s.get("cov", CovSpec())
    rule = s["rule"]
    if rule is None:
        # correlated XOR: active set drawn uniformly from all features
        active = np.sort(np.random.default_rng(derive_seed(seed, 0)).choice(p, 8, replace=False))
        rule = RuleSpec("XOR", active, 2.0)
    X = gen_features(n + n_test, p, cov, derive_seed(seed, 1))
    y = apply_rule(X, rule, derive_seed(seed, 2))
    y_train = add_noise(y[:n], NoiseSpec("SWAP_UNIFORM", s["noise"]), derive_seed(seed, 3))
    y_test = add_noise(y[n:], NoiseSpec("SWAP_UNIFORM", s["noise"]), derive_seed(seed, 4))
    names = _names(p)
    truth = TruthSet(s.get("truth", rule.all_active))
    params = {"name": name, "seed": seed, "n": n, "p": p, "n_test": n_test, "noise": s["noise"],
              "active": sorted(truth.active), **s.get("extra", {})}
    return Scenario(name, Dataset(X[:n], names, y_train), Dataset(X[n:], names, y_test), truth, params)


def enhancer_scenario(real: Dataset, n_train: int, seed: int, thresholds=None,
                      noise: float = 0.2) -> Scenario:
    """Embed the AND rule into a real feature matrix, with balanced swap
    noise; train and test sets have ``n_train`` rows each."""
    thresholds = ENHANCER_RULE if thresholds is None else thresholds
    if 2 * n_train > real.n:
        raise ValueError("not enough rows for disjoint train and test sets")
    y = embed_rule(real.features, real.feature_names, thresholds)
    rows = np.random.default_rng(derive_seed(seed, 0)).permutation(real.n)[: 2 * n_train]
    y = add_noise(y[rows], NoiseSpec("SWAP_BALANCED", noise), derive_seed(seed, 1))
    X = real.features[rows]
    truth = TruthSet([real.feature_names.index(k) for k in thresholds])
    return Scenario("sim4-enhancer", Dataset(X[:n_train], real.feature_names, y[:n_train]),
                    Dataset(X[n_train:], real.feature_names, y[n_train:]), truth,
                    {"n": n_train, "seed": seed, "noise": noise})
