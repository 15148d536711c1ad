import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irf.rit import (
    RitParams,
    Transaction,
    TransactionSet,
    as_interaction,
    filter_interactions,
    format_transactions,
    n_nodes,
    parse_transactions,
    prevalence,
    run,
)

import oracles


def T(items, label):
    return Transaction(frozenset(items), label)


def test_prevalence_examples():
    ts = [T({1, 2}, 1), T({2}, 1), T({1, 2}, 0)]
    assert prevalence({1, 2}, ts, 1) == 0.5
    assert prevalence((), ts, 1) == 1.0
    assert prevalence({7}, ts, 0) == 0.0
    with pytest.raises(ValueError):
        prevalence({1}, [T({1}, 1)], 0)


transactions_st = st.lists(
    st.tuples(st.frozensets(st.integers(0, 7), max_size=8), st.integers(0, 1)),
    min_size=1, max_size=50,
)


@settings(max_examples=300, deadline=None)
@given(transactions_st, st.frozensets(st.integers(0, 7), max_size=4), st.integers(0, 1))
def test_prevalence_matches_oracle(pairs, S, label):
    if not any(z == label for _, z in pairs):
        return
    ts = [T(items, z) for items, z in pairs]
    assert prevalence(S, ts, label) == float(oracles.prevalence(S, pairs, label))


def test_counts_behave_like_repeats():
    ts = TransactionSet([0, 2, 3, 3], [1, 2, 2], [1, 1, 0], counts=[3, 1, 2])
    flat = ts.materialize()
    assert len(flat) == 6
    assert prevalence({1, 2}, ts, 1) == prevalence({1, 2}, flat, 1) == 0.75
    params = RitParams(M=30, D=2, seed=4)
    assert run(ts, 1, params) == run(flat, 1, params)


def test_run_identical_transactions():
    ts = [T({2, 5, 9}, 1)] * 6 + [T({1}, 0)]
    assert run(ts, 1, RitParams(M=10, D=3)) == {(2, 5, 9)}


def test_run_disjoint_transactions():
    ts = [T({i}, 1) for i in range(12)] + [T(set(range(12)), 0)]
    # a lone root survives only if every node on its path redraws it
    out = run(ts, 1, RitParams(M=20, D=2, n_child=2, seed=1))
    assert all(len(S) == 1 for S in out)
    assert run([T({0}, 1), T({1}, 1)], 1, RitParams(M=1, D=1, seed=0)) <= {(0,), (1,)}


def test_run_pairwise_disjoint_gives_nothing_without_repeats():
    # 500 distinct singletons: a repeat along one depth-1 path is rare, and the
    # draws below contain none
    ts = [T({i}, 1) for i in range(500)]
    assert run(ts, 1, RitParams(M=5, D=1, n_child=1, seed=0)) == set()


def _prevalent_instance(rng):
    ts = []
    for i in range(20):
        extra = set(rng.choice(np.arange(4, 12), 3, replace=False).tolist())
        ts.append(T(({1, 2, 3} if i < 18 else set()) | extra, 1))
    return ts


def test_prevalent_set_survives():
    ts = _prevalent_instance(np.random.default_rng(0))
    hits = sum(
        any({1, 2, 3} <= set(S) for S in run(ts, 1, RitParams(M=100, D=3, n_child=2, seed=s)))
        for s in range(200)
    )
    assert hits / 200 >= 0.99


def test_outputs_lie_inside_some_class_transaction():
    rng = np.random.default_rng(2)
    ts = [T(set(rng.choice(10, 5, replace=False).tolist()), int(rng.integers(0, 2))) for _ in range(40)]
    ones = [t.items for t in ts if t.label == 1]
    out = run(ts, 1, RitParams(M=200, D=2, seed=3))
    assert out
    for S in out:
        assert S == tuple(sorted(S))
        assert any(set(S) <= items for items in ones)


def _naive_run(ts, label, params):
    """Same draw matrix, no pruning, no memoization."""
    pool = ts.class_pool(label)
    J = n_nodes(params)
    draws = pool[np.random.default_rng(params.seed).integers(0, len(pool), size=(params.M, J))]
    out = set()
    for row in draws:
        sets = [set(ts.itemset(int(row[0])))]
        for j in range(1, J):
            sets.append(sets[(j - 1) // params.n_child] & set(ts.itemset(int(row[j]))))
        out |= {tuple(sorted(s)) for s in sets[J - params.n_child**params.D:] if s}
    return out


@pytest.mark.parametrize("D, n_child", [(1, 1), (2, 3), (4, 2)])
def test_pruning_is_output_equivalent(D, n_child):
    rng = np.random.default_rng(D * 10 + n_child)
    ts = TransactionSet.from_transactions(
        T(set(rng.choice(8, int(rng.integers(0, 7)), replace=False).tolist()), int(rng.integers(0, 2)))
        for _ in range(30))
    for seed in range(5):
        params = RitParams(M=40, D=D, n_child=n_child, seed=seed)
        assert run(ts, 1, params) == _naive_run(ts, 1, params)


def test_run_deterministic_per_seed():
    ts = _prevalent_instance(np.random.default_rng(1))
    assert run(ts, 1, RitParams(M=50, seed=9)) == run(ts, 1, RitParams(M=50, seed=9))


def test_run_errors():
    with pytest.raises(ValueError):
        run([T({1}, 0)], 1, RitParams())
    for bad in (dict(M=0), dict(D=0), dict(n_child=0)):
        with pytest.raises(ValueError):
            RitParams(**bad)


def _survival(ts, S, seeds):
    S = set(S)
    return np.mean([any(S <= set(R) for R in run(ts, 1, RitParams(M=1, D=2, seed=s))) for s in seeds])


def test_survival_is_monotone_and_order_free():
    rng = np.random.default_rng(5)
    ts = [T(set(rng.choice(6, int(rng.integers(2, 6)), replace=False).tolist()), 1) for _ in range(20)]
    seeds = range(1000)
    sub, sup = _survival(ts, {0, 1}, seeds), _survival(ts, {0, 1, 2}, seeds)
    sigma = np.sqrt(sup * (1 - sup) / 1000 + sub * (1 - sub) / 1000)
    assert sub >= sup - 2 * sigma
    shuffled = [ts[i] for i in rng.permutation(len(ts))]
    other = _survival(shuffled, {0, 1}, range(1000, 2000))
    assert abs(other - sub) <= 4 * np.sqrt(sub * (1 - sub) / 500 + 1e-12)


def test_filter_examples():
    # {1,2}: prevalence 0.9 in class 1, 0.05 in class 0
    contrast = [T({1, 2}, 1)] * 9 + [T({1}, 1)] + [T({1, 2}, 0)] + [T({3}, 0)] * 19
    assert filter_interactions({(1, 2)}, contrast, 0.5, 0.1) == {(1, 2)}
    # {4,5}: prevalence 0.8 in both classes
    both = [T({4, 5}, 1)] * 8 + [T({6}, 1)] * 2 + [T({4, 5}, 0)] * 8 + [T({6}, 0)] * 2
    assert filter_interactions({(4, 5)}, both, 0.5, 0.1) == set()
    assert filter_interactions({(4, 5), (6,)}, both, 0.0, 0.999) == {(4, 5), (6,)}
    for t1, t0 in [(0.5, -0.1), (1.2, 0.0), (float("nan"), 0.0)]:
        with pytest.raises(ValueError):
            filter_interactions(set(), both, t1, t0)


def test_text_round_trip():
    ts = [T({3, 1}, 1), T(set(), 0), T({10}, 0)]
    text = format_transactions(ts)
    assert text == "1:1,3\n0:\n0:10\n"
    assert parse_transactions(text) == ts
    assert format_transactions([]) == ""


@settings(max_examples=100, deadline=None)
@given(transactions_st)
def test_text_round_trip_fuzz(pairs):
    ts = [T(items, z) for items, z in pairs]
    assert parse_transactions(format_transactions(ts)) == ts


@pytest.mark.parametrize("text", ["2:1\n", "1;2\n", "1:a\n", "0:-1\n"])
def test_parse_errors(text):
    with pytest.raises(ValueError, match="line 1"):
        parse_transactions(text)


def test_interaction_and_transaction_types():
    assert as_interaction([3, 1, 3]) == (1, 3)
    with pytest.raises(ValueError):
        as_interaction([])
    with pytest.raises(ValueError):
        Transaction(frozenset(), 2)
    with pytest.raises(ValueError):
        TransactionSet([0, 1], [1], [1, 0])
