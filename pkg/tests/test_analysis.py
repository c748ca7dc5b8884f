import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy import stats

from pnvec import analysis
from pnvec.analysis import (
    cluster_rule_purity,
    fit_rule_tree,
    knn_cross_validate,
    knn_predict,
    query_nearest,
    welch_t_test,
)
from pnvec.dfg import Vocabulary
from pnvec.embedder import EmbeddingSpace
from pnvec.errors import NoVariance, SingleClass, StratifyError
from pnvec.netgen import RULES, RuleConfig, enumerate_configs

CFGS = enumerate_configs()


def space_from(X, T=None):
    X = np.asarray(X, dtype=float)
    T = np.eye(X.shape[1]) if T is None else np.asarray(T, dtype=float)
    vocab = Vocabulary({f"t{i}": i for i in range(len(T))}, {f"m{i}": i for i in range(len(X))})
    return EmbeddingSpace(X, T, np.zeros_like(T), vocab)


# --------------------------------------------------------------------------
# retrieval


def test_query_nearest_basic():
    s = space_from([[1, 0], [0.9, 0.1], [0, 1], [-1, 0]])
    got = query_nearest(s, "m0", 3)
    assert [m for m, _ in got] == ["m1", "m2", "m3"]
    assert got[2][1] == pytest.approx(-1)
    assert query_nearest(s, "m0", 0) == []
    with pytest.raises(ValueError):
        query_nearest(s, "m0", 4)


def test_query_ties_broken_by_id():
    s = space_from([[1, 0], [0, 1], [0, 1], [0, 1]])
    assert [m for m, _ in query_nearest(s, "m1", 3)] == ["m2", "m3", "m0"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_query_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(7, 3))
    a = [m for m, _ in query_nearest(space_from(X), "m3", 6)]
    b = [m for m, _ in query_nearest(space_from(X * c), "m3", 6)]
    assert a == b


def test_similarity_matrices(trained_space):
    space, _ = trained_space
    S = analysis.task_similarity_matrix(space)
    assert np.allclose(np.diag(S), 1) and np.array_equal(S, S.T)
    assert S.min() >= -1 and S.max() <= 1
    TM = analysis.task_model_matrix(space)
    assert TM.shape == (space.vocab.k, space.vocab.n)
    assert TM.min() >= -1 and TM.max() <= 1
    models = space.vocab.model_list()
    for t, i in space.vocab.tokens.items():
        best = analysis.query_models_for_task(space, t, 1)[0][0]
        assert TM[i, models.index(best)] == TM[i].max()


def test_matrix_csv(tmp_path):
    analysis.write_matrix_csv(np.array([[1.0, 0.5]]), ["a"], ["x", "y"], tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines() == [",x,y", "a,1.0,0.5"]


# --------------------------------------------------------------------------
# k-NN


def test_knn_separable():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal([5, 1], 0.3, (20, 2)), rng.normal([-5, 1], 0.3, (20, 2))])
    y = [0] * 20 + [1] * 20
    cm = knn_cross_validate(X, y, 1, 5)
    assert cm.accuracy == 1.0 and cm.total == 40
    assert knn_cross_validate(X, y, 3, 40).accuracy == 1.0


def test_knn_duplicates():
    X = np.array([[1, 0]] * 5 + [[0, 1]] * 5, dtype=float)
    assert knn_cross_validate(X, ["a"] * 5 + ["b"] * 5, 1, 5).accuracy == 1.0


def test_knn_random_labels_near_chance():
    rng = np.random.default_rng(11)
    accs = []
    for seed in range(20):
        X = rng.normal(size=(90, 4))
        y = rng.integers(0, 3, 90).tolist()
        accs.append(knn_cross_validate(X, y, 1, 5, seed=seed).accuracy)
    assert abs(np.mean(accs) - 1 / 3) < 0.06


def test_stratification_and_loo():
    rng = np.random.default_rng(0)
    y = [0] * 10 + [1] * 5
    folds = analysis.stratified_folds(y, 5, rng)
    for f in range(5):
        members = [y[i] for i in np.flatnonzero(folds == f)]
        assert members.count(0) == 2 and members.count(1) == 1
    loo = analysis.stratified_folds(y, 15, rng)
    assert sorted(loo.tolist()) == list(range(15))
    with pytest.raises(StratifyError):
        analysis.stratified_folds([0] * 10 + [1] * 2, 5, rng)
    with pytest.raises(ValueError):
        analysis.stratified_folds(y, 1, rng)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 3, 5]))
def test_knn_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    D = rng.integers(0, 4, size=(5, 12)).astype(float)  # coarse values force ties
    y = rng.integers(0, 3, 12).tolist()
    base = knn_predict(D, y, k)
    perm = rng.permutation(12)
    assert knn_predict(D[:, perm], [y[j] for j in perm], k) == base


def test_confusion_output(tmp_path):
    cm = analysis.ConfusionMatrix([0, 1, 2], np.array([[3, 0, 0], [1, 2, 0], [0, 0, 3]]))
    assert cm.accuracy == pytest.approx(8 / 9)
    assert "accuracy = 0.8889" in cm.to_text()
    cm.write_csv(tmp_path / "cm.csv")
    assert (tmp_path / "cm.csv").read_text().splitlines()[2] == "1,1,2,0"
    assert analysis.majority_baseline([0, 0, 1]) == pytest.approx(2 / 3)


# --------------------------------------------------------------------------
# rule tree and purity


def test_tree_single_flag():
    labels = [c.F for c in CFGS]
    tree = fit_rule_tree(CFGS, labels)
    assert tree.root.rule == "F" and tree.depth == 1 and tree.purity == 1
    assert all(leaf.purity == 1 for leaf in tree.leaves())


def test_tree_two_flags():
    labels = [2 * c.F + c.D for c in CFGS]
    tree = fit_rule_tree(CFGS, labels)
    assert tree.depth == 2 and tree.purity == 1
    assert tree.root.rule in ("D", "F")
    assert all(tree.predict(c) == y for c, y in zip(CFGS, labels))
    text = tree.to_text()
    assert text.startswith(f"split on {tree.root.rule}")
    dot = tree.to_dot()
    assert dot.startswith("digraph") and dot.count("->") == 6


def test_tree_binary_b_split():
    labels = [int(c.B > 0) for c in CFGS]
    tree = fit_rule_tree(CFGS, labels)
    assert tree.root.rule == "B" and [v for v, _ in tree.root.branches] == [(0,), (1, 2)]


def test_tree_noise_and_single_class():
    labels = [-1 if c.A else c.F for c in CFGS]
    assert fit_rule_tree(CFGS, labels).root.size == 48
    with pytest.raises(SingleClass):
        fit_rule_tree(CFGS, [0] * 96)
    with pytest.raises(ValueError):
        fit_rule_tree(CFGS, [0, 1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(RULES), min_size=1, max_size=3, unique=True), st.integers(0, 10**6))
def test_tree_fits_any_flag_function(fields, seed):
    rng = np.random.default_rng(seed)
    table = {}
    labels = []
    for c in CFGS:
        key = tuple(getattr(c, f) for f in fields)
        table.setdefault(key, int(rng.integers(0, 4)))
        labels.append(table[key])
    if len(set(labels)) < 2:
        return
    assert fit_rule_tree(CFGS, labels).purity == 1


def test_cluster_rule_purity_examples():
    labels = [c.F * 2 + c.D for c in CFGS]
    assert cluster_rule_purity(labels, CFGS, "FD") == 1.0
    cfgs = [RuleConfig()] * 9 + [RuleConfig(F=1)]
    assert cluster_rule_purity([0] * 10, cfgs, "F") == pytest.approx(0.9)
    assert cluster_rule_purity([-1] * 10, cfgs, "F") != cluster_rule_purity([-1] * 10, cfgs, "F")  # NaN
    b_labels = [int(c.B > 0) for c in CFGS]
    assert cluster_rule_purity(b_labels, CFGS, "B", binary_b=True) == 1.0
    assert cluster_rule_purity(b_labels, CFGS, "B") == pytest.approx(64 / 96)


def test_flag_distance():
    assert analysis.flag_distance(RuleConfig.parse("010100"), RuleConfig.parse("010110")) == 1
    assert analysis.flag_distance(RuleConfig.parse("000000"), RuleConfig.parse("121111")) == 6


# --------------------------------------------------------------------------
# Welch


def test_welch_identical_samples():
    r = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert r.t == 0 and not r.reject


def test_welch_far_apart():
    assert welch_t_test([0, 0, 0, 0], [10, 10, 10, 10.0001]).reject


def test_welch_worked_example():
    # sample 1 from the standard worked example for Welch's test
    a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4]
    b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4]
    # by hand: mean_a = 20.82, mean_b = 22.98667; s_a^2 = 7.6631..., s_b^2 = 3.7755...
    ma, mb = np.mean(a), np.mean(b)
    va, vb = np.var(a, ddof=1) / 15, np.var(b, ddof=1) / 15
    t_hand = (ma - mb) / np.sqrt(va + vb)
    r = welch_t_test(a, b, alpha=0.05)
    assert abs(r.t - t_hand) < 1e-6
    assert abs(r.t - (-2.46)) < 0.005
    assert abs(r.df - 24.99) < 0.01
    assert abs(r.p - 0.021) < 0.001 and r.reject


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=12),
       st.lists(st.floats(-100, 100), min_size=2, max_size=12))
@example([0.0, 0.0], [0.0, 2.660126661136673e-94])  # squared variances underflow
def test_welch_matches_scipy(a, b):
    if np.var(a) == 0 and np.var(b) == 0:
        return
    r = welch_t_test(a, b)
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert r.t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert r.p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)
    assert r.reject == (r.p < 0.01)


def test_welch_degenerate():
    r = welch_t_test([2, 2, 2], [2, 2])
    assert (r.t, r.p, r.reject) == (0.0, 1.0, False)
    with pytest.raises(NoVariance):
        welch_t_test([2, 2, 2], [2, 2], strict=True)
    r = welch_t_test([1, 1], [2, 2])
    assert r.reject and r.t == -np.inf
    with pytest.raises(ValueError):
        welch_t_test([1], [1, 2])
