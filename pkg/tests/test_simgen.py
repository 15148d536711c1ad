import numpy as np
import pytest
from scipy import stats

from irf.data import Dataset
from irf.simgen import (
    CovSpec,
    NoiseSpec,
    RuleSpec,
    SCENARIO_EXAMPLES,
    add_noise,
    apply_rule,
    embed_rule,
    enhancer_scenario,
    gen_features,
    scenario,
)


def test_cauchy_median():
    x = gen_features(100_000, 1, CovSpec(), 0)[:, 0]
    assert abs(np.median(x)) < 0.02
    assert gen_features(1, 1, CovSpec(), 3).shape == (1, 1)


def test_decaying_rho_zero_has_cauchy_marginals():
    # one test at alpha = 0.01; the p-values are uniform across seeds
    X = gen_features(10_000, 3, CovSpec("DECAYING", 0.0), 1)
    assert stats.kstest(X[:, 1], stats.cauchy.cdf).pvalue > 0.01


def test_block_correlation():
    X = gen_features(10_000, 20, CovSpec("BLOCK", 0.75, 10), 2)
    within = stats.kendalltau(X[:, 0], X[:, 1])
    across = stats.kendalltau(X[:, 0], X[:, 10])
    assert within.statistic > 0.3 and within.pvalue < 1e-6
    # tau's null sd is about sqrt(2 (2n + 5) / (9 n (n - 1))) ~ 0.0067
    assert abs(across.statistic) < 0.03


def test_heavy_tails():
    x = gen_features(100_000, 1, CovSpec(), 4)[:, 0]
    gaussian = 2 * stats.norm.sf(10)
    assert np.mean(np.abs(x) > 10) >= 10 * gaussian
    assert abs(np.mean(np.abs(x) > 10) - 2 * stats.cauchy.sf(10)) < 0.005


def test_gen_features_reproducible_and_validated():
    a = gen_features(50, 4, CovSpec("DECAYING", 0.5), 7)
    np.testing.assert_array_equal(a, gen_features(50, 4, CovSpec("DECAYING", 0.5), 7))
    with pytest.raises(ValueError):
        gen_features(0, 3, CovSpec(), 0)
    with pytest.raises(ValueError):
        CovSpec("BLOCK", 1.0)


def test_and_rule_class_fraction():
    X = gen_features(100_000, 4, CovSpec(), 5)
    frac = apply_rule(X, RuleSpec("AND", range(4), -1.0)).mean()
    assert 0.75**4 == pytest.approx(0.3164, abs=1e-4)
    assert abs(frac - 0.75**4) < 0.01


def test_rule_examples():
    X = np.array([[0.0, 0.5, -3.0, 9.0], [1e300, -5.0, -5.0, -5.0]])
    xor = RuleSpec("XOR", range(3), 1.0)
    assert apply_rule(X[:1], xor).tolist() == [0]
    assert apply_rule(X, RuleSpec("OR", range(3), 3.2)).tolist() == [0, 1]
    assert apply_rule(X, RuleSpec("AND", [0, 3], -1.0)).tolist() == [1, 0]
    with pytest.raises(ValueError):
        apply_rule(X, RuleSpec("AND", [4], 0.0))
    with pytest.raises(ValueError):
        RuleSpec("AND", ())


def test_rule_ignores_inactive_columns():
    rng = np.random.default_rng(0)
    X = rng.standard_cauchy((200, 6))
    rule = RuleSpec("XOR", [1, 3], 0.2)
    Y = X.copy()
    Y[:, [0, 2, 4, 5]] = rng.standard_cauchy((200, 4))
    np.testing.assert_array_equal(apply_rule(X, rule), apply_rule(Y, rule))


def test_mixture_rule():
    X = gen_features(20_000, 12, CovSpec(), 6)
    a, b = RuleSpec("XOR", range(8), 2.0), RuleSpec("AND", range(8, 12), -0.5)
    mix = RuleSpec("MIXTURE", components=(a, b), pi=0.75)
    y = apply_rule(X, mix, seed=1)
    np.testing.assert_array_equal(y, apply_rule(X, mix, seed=1))
    use_a = np.random.default_rng(1).random(len(X)) < 0.75
    np.testing.assert_array_equal(y[use_a], apply_rule(X, a)[use_a])
    np.testing.assert_array_equal(y[~use_a], apply_rule(X, b)[~use_a])
    assert abs(use_a.mean() - 0.75) < 4 * np.sqrt(0.75 * 0.25 / len(X))
    assert mix.all_active == tuple(range(12))
    with pytest.raises(ValueError):
        RuleSpec("MIXTURE", components=(a,), pi=0.5)
    with pytest.raises(ValueError):
        RuleSpec("MIXTURE", components=(a, mix), pi=0.5)


def test_uniform_swap_counts():
    y = np.random.default_rng(0).integers(0, 2, 100)
    assert (add_noise(y, NoiseSpec(fraction=0.0), 1) == y).all()
    flipped = add_noise(y, NoiseSpec(fraction=0.2), 1)
    assert (flipped != y).sum() == 20
    mask = flipped != y
    back = flipped.copy()
    back[mask] ^= 1
    np.testing.assert_array_equal(back, y)
    np.testing.assert_array_equal(add_noise(y, NoiseSpec(fraction=0.2), 1), flipped)


def test_balanced_swap():
    y = np.zeros(200, dtype=int)
    y[:20] = 1
    out = add_noise(y, NoiseSpec("SWAP_BALANCED", 0.2), 3)
    assert out.sum() == 20
    assert (out != y).sum() == 8
    assert (out[:20] == 0).sum() == 4
    with pytest.raises(ValueError):
        add_noise(np.ones(10, int), NoiseSpec("SWAP_BALANCED", 0.3), 0)
    with pytest.raises(ValueError):
        NoiseSpec(fraction=0.5)


def test_embed_rule():
    X = np.array([[2.0, 100.0], [1.0, 100.0], [3.0, 50.0]])
    names = ["kr", "zld"]
    assert embed_rule(X, names, {"kr": 1.25, "zld": 75.0}).tolist() == [1, 0, 0]
    assert embed_rule(X, names, {"kr": 1e308}).tolist() == [0, 0, 0]
    assert embed_rule(X, names, {"kr": X[:, 0].min() - 1}).tolist() == [1, 1, 1]
    with pytest.raises(ValueError, match="columns not found: twi"):
        embed_rule(X, names, {"twi": 0.0})


def test_enhancer_scenario_on_synthetic_matrix():
    rng = np.random.default_rng(0)
    names = ["kr", "hb", "D", "twi", "zld", "other"]
    X = np.column_stack([rng.exponential(2.0, (400, 4)), rng.uniform(0, 100, 400), rng.random(400)])
    real = Dataset(X, names, np.zeros(400, int))
    sc = enhancer_scenario(real, 150, seed=1)
    assert (sc.train.n, sc.test.n) == (150, 150)
    assert sc.truth.active == frozenset({0, 1, 2, 3, 4})
    with pytest.raises(ValueError):
        enhancer_scenario(real, 201, seed=1)


def test_scenario_shapes():
    sc = scenario("sim1-and-n500", 0)
    assert (sc.train.n, sc.train.p, sc.test.n) == (500, 50, 500)
    assert sc.truth.active == frozenset({0, 1, 2, 3})
    assert sc.train.feature_names[:4] == ("x1", "x2", "x3", "x4")
    sc = scenario("sim2-xor8-noise15", 0, n_test=10)
    assert (sc.train.n, sc.train.p) == (5000, 100)
    assert sc.truth.active == frozenset(range(8))
    assert sc.params["noise"] == 0.15
    sc = scenario("sim3-bigp-0.2", 0, n_train=20, n_test=5)
    assert sc.train.p == 1000 and sc.params["noise"] == 0.2
    sc = scenario("sim2-mixture-pi75", 0, n_train=20, n_test=5)
    assert sc.truth.active == frozenset(range(8))
    assert sc.params["and_active"] == [8, 9, 10, 11]


def test_correlated_scenario_draws_active_set():
    sc = scenario("sim2-corr-block-rho75", 3, n_train=50, n_test=5)
    assert len(sc.truth.active) == 8
    assert sc.params["active"] == sorted(sc.truth.active)
    assert sc.params["noise"] == 0.0


def test_scenario_reproducible():
    a, b = scenario("sim1-xor-n200", 5), scenario("sim1-xor-n200", 5)
    np.testing.assert_array_equal(a.train.features, b.train.features)
    np.testing.assert_array_equal(a.test.labels, b.test.labels)
    c = scenario("sim1-xor-n200", 6)
    assert not np.array_equal(a.train.features, c.train.features)


@pytest.mark.parametrize("name", SCENARIO_EXAMPLES)
def test_example_names_resolve(name):
    sc = scenario(name, 0, n_train=30, n_test=5)
    assert sc.train.n == 30 and sc.test.n == 5


def test_unknown_scenario():
    with pytest.raises(KeyError):
        scenario("sim9", 0)
