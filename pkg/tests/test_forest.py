import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynvote.exceptions import DimensionMismatchError, InvalidInputError, UndefinedAccuracyError
from dynvote.forest import (
    Dataset,
    ForestConfig,
    RandomForest,
    derive_seed,
    draw_bootstrap,
    leaf_id,
    oob_accuracy,
    oob_accuracy_subset,
    oob_predictions,
    oob_subforest_predict,
    predict_label,
    predict_proba,
    train_forest,
    train_tree,
)

import oracles
from conftest import leaf, stump


def _tree_invariants(tree, data, bootstrap):
    internal = tree.feature >= 0
    assert np.all(tree.left[internal] > 0) and np.all(tree.right[internal] > 0)
    assert np.all(tree.left[~internal] == -1) and np.all(tree.right[~internal] == -1)
    # every bootstrap draw lands in a leaf whose histogram counts it
    reached = np.zeros_like(tree.counts)
    nodes = tree.apply(data.features[bootstrap])
    np.add.at(reached, (nodes, data.labels[bootstrap]), 1)
    assert np.array_equal(reached[~internal], tree.counts[~internal])
    assert np.all(tree.counts[~internal].sum(axis=1) > 0)
    # internal histograms are the sum of their children
    for n in np.flatnonzero(internal):
        assert np.array_equal(tree.counts[n], tree.counts[tree.left[n]] + tree.counts[tree.right[n]])


class TestTrainTree:
    def test_separable_single_split(self):
        data = Dataset([[1.0], [2.0], [8.0], [9.0]], [0, 0, 1, 1], 2)
        tree = train_tree(data, np.arange(4), ForestConfig(), tree_seed=0)
        assert tree.n_nodes == 3 and tree.n_leaves == 2
        assert tree.feature[0] == 0
        assert 2.0 < tree.threshold[0] < 8.0
        assert tree.threshold[0] == 5.0
        leaves = tree.counts[tree.feature < 0]
        assert sorted(map(tuple, leaves)) == [(0, 2), (2, 0)]

    def test_pure_node_is_leaf(self):
        data = Dataset(np.arange(6.0).reshape(3, 2), [1, 1, 1], 2)
        tree = train_tree(data, np.arange(3), ForestConfig(), tree_seed=0)
        assert tree.n_nodes == 1
        assert tree.counts[0].tolist() == [0, 3]

    def test_conflicting_duplicates_terminate(self):
        X = np.array([[1.0, 1.0]] * 4 + [[5.0, 0.0]] * 2)
        data = Dataset(X, [0, 1, 0, 1, 1, 1], 2)
        tree = train_tree(data, np.arange(6), ForestConfig(max_features=2), tree_seed=0)
        hists = sorted(map(tuple, tree.counts[tree.feature < 0]))
        assert hists == [(0, 2), (2, 2)]

    def test_min_samples_split_and_depth(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.normal(size=(40, 3)), rng.integers(0, 2, 40), 2)
        stump_tree = train_tree(data, np.arange(40), ForestConfig(max_depth=1), tree_seed=1)
        assert stump_tree.n_nodes <= 3
        root_only = train_tree(data, np.arange(40), ForestConfig(min_samples_split=41), tree_seed=1)
        assert root_only.n_nodes == 1

    def test_bootstrap_validation(self):
        data = Dataset([[1.0], [2.0]], [0, 1], 2)
        with pytest.raises(InvalidInputError):
            train_tree(data, [], ForestConfig(), 0)
        with pytest.raises(InvalidInputError):
            train_tree(data, [0, 2], ForestConfig(), 0)

    @pytest.mark.parametrize("case", range(20))
    def test_matches_exhaustive_cart_oracle(self, case):
        rng = np.random.default_rng(100 + case)
        n = int(rng.integers(4, 16))
        d = int(rng.integers(1, 4))
        J = int(rng.integers(2, 4))
        # coarse grid values produce many duplicated rows and tied splits
        X = rng.integers(0, 4, size=(n, d)).astype(float)
        y = rng.integers(0, J, size=n)
        data = Dataset(X, y, J)
        boot = rng.integers(0, n, size=n)
        tree = train_tree(data, boot, ForestConfig(max_features=d), tree_seed=case)
        expected = oracles.cart_leaves(X, y, boot, J)
        assert tree.counts[tree.feature < 0].tolist() == expected
        _tree_invariants(tree, data, boot)

    def test_invariants_on_random_trees(self, small_forest):
        data, forest = small_forest
        for k, tree in enumerate(forest.trees[:10]):
            boot, _ = draw_bootstrap(forest.config.seed, k, data.n_samples)
            _tree_invariants(tree, data, boot)


class TestTrainForest:
    def test_single_tree(self):
        data = Dataset([[0.0], [1.0], [2.0]], [0, 1, 1], 2)
        forest = train_forest(data, ForestConfig(n_trees=1, seed=4))
        assert forest.n_trees == 1 and forest.inbag.shape == (1, 3)

    def test_same_seed_identical(self, small_forest):
        data, forest = small_forest
        again = train_forest(data, forest.config)
        assert np.array_equal(forest.inbag, again.inbag)
        for a, b in zip(forest.trees, again.trees):
            for name in ("feature", "threshold", "left", "right", "counts"):
                assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_thread_count_does_not_matter(self, small_forest):
        data, forest = small_forest
        threaded = train_forest(data, forest.config, n_jobs=4)
        assert np.array_equal(forest.inbag, threaded.inbag)
        for a, b in zip(forest.trees, threaded.trees):
            assert np.array_equal(a.threshold, b.threshold)
            assert np.array_equal(a.counts, b.counts)

    def test_inbag_matches_bootstrap_draws(self, small_forest):
        data, forest = small_forest
        for k in range(forest.n_trees):
            boot, _ = draw_bootstrap(forest.config.seed, k, data.n_samples)
            assert boot.size == data.n_samples
            assert np.array_equal(np.flatnonzero(forest.inbag[k]), np.unique(boot))

    def test_every_sample_has_subforest_at_500_trees(self):
        # P(sample in-bag in all 500 trees) ~ 0.632 ** 500; 100 seeds never hit it
        for seed in range(100):
            inbag = np.zeros((500, 100), dtype=bool)
            for k in range(500):
                boot, _ = draw_bootstrap(seed, k, 100)
                inbag[k, boot] = True
            assert (~inbag).any(axis=0).all()

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            ForestConfig(n_trees=0)
        with pytest.raises(InvalidInputError):
            ForestConfig(max_features=0)
        data = Dataset([[0.0], [1.0]], [0, 1], 2)
        with pytest.raises(InvalidInputError):
            train_forest(data, ForestConfig(max_features=2))
        assert ForestConfig().resolve_max_features(10) == 3
        assert ForestConfig().resolve_max_features(1) == 1

    def test_derive_seed_distinct(self):
        seeds = {derive_seed(7, k) for k in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(7, 3) == derive_seed(7, 3)
        assert derive_seed(7, 3) != derive_seed(8, 3)


class TestPrediction:
    def test_two_tree_average(self):
        forest = RandomForest([leaf([4, 0]), leaf([2, 2])], np.ones((2, 2), bool), 2, 1)
        assert predict_proba(forest, [0.3]).tolist() == [0.75, 0.25]
        assert predict_label(forest, [0.3]) == 0

    def test_all_pure_class_one(self):
        forest = RandomForest([leaf([0, 3]), stump(0.0, [0, 1], [0, 5])],
                              np.ones((2, 2), bool), 2, 1)
        assert predict_proba(forest, [1.0]).tolist() == [0.0, 1.0]

    def test_tie_goes_to_smallest_class(self):
        forest = RandomForest([leaf([1, 1])], np.ones((1, 2), bool), 2, 1)
        assert predict_label(forest, [0.0]) == 0

    def test_single_tree_majority(self):
        forest = RandomForest([stump(0.5, [1, 3], [5, 2])], np.ones((1, 2), bool), 2, 1)
        assert predict_label(forest, [0.0]) == 1
        assert predict_label(forest, [1.0]) == 0

    def test_matches_per_tree_oracle(self, small_forest):
        data, forest = small_forest
        rng = np.random.default_rng(5)
        for x in rng.normal(size=(40, 4)):
            np.testing.assert_allclose(predict_proba(forest, x), oracles.forest_proba(forest, x),
                                       rtol=0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4))
    def test_proba_is_simplex_point(self, small_forest, x):
        _, forest = small_forest
        p = predict_proba(forest, x)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_dimension_mismatch(self, small_forest):
        _, forest = small_forest
        with pytest.raises(DimensionMismatchError):
            predict_proba(forest, [1.0, 2.0])
        with pytest.raises(DimensionMismatchError):
            predict_label(forest, np.zeros(5))
        with pytest.raises(DimensionMismatchError):
            leaf_id(forest.trees[0], [1.0])


class TestLeafId:
    def test_root_leaf(self):
        assert leaf_id(leaf([1, 1]), [123.0]) == 0

    def test_training_sample_lands_in_its_leaf(self, small_forest):
        data, forest = small_forest
        tree = forest.trees[0]
        boot, _ = draw_bootstrap(forest.config.seed, 0, data.n_samples)
        for i in np.unique(boot):
            node = tree.apply(data.features[i])[0]
            assert tree.leaf_index[node] == leaf_id(tree, data.features[i])
            assert tree.counts[node, data.labels[i]] > 0

    def test_matches_traversal_oracle(self, small_forest):
        _, forest = small_forest
        tree = max(forest.trees, key=lambda t: t.n_nodes)
        rng = np.random.default_rng(9)
        for x in rng.normal(scale=2.0, size=(1000, 4)):
            assert leaf_id(tree, x) == oracles.tree_leaf(tree, x)

    def test_unused_feature_does_not_move_sample(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 3))
        X[:, 2] = 0.0  # constant, so never split on
        data = Dataset(X, (X[:, 0] > 0).astype(int), 2)
        forest = train_forest(data, ForestConfig(n_trees=20, seed=1))
        assert not np.any(np.concatenate([t.feature for t in forest.trees]) == 2)
        Q = rng.normal(size=(30, 3))
        P = Q.copy()
        P[:, 2] = rng.normal(scale=100.0, size=30)
        assert np.array_equal(forest.apply(Q), forest.apply(P))


class TestOOB:
    def test_fixture_accuracy(self, oob_fixture):
        data, forest = oob_fixture
        assert oob_subforest_predict(forest, data, 0) == 1
        assert oob_subforest_predict(forest, data, 1) == 0
        assert oob_subforest_predict(forest, data, 2) == 1
        assert oob_subforest_predict(forest, data, 3) == 1
        assert oob_accuracy(forest, data) == 0.75
        assert oob_accuracy(forest, data) == oracles.oob_accuracy(forest, data.features, data.labels)

    def test_single_oob_tree_decides(self, oob_fixture):
        data, forest = oob_fixture
        # sample 1 is OOB only in tree 0
        x = data.features[1]
        assert oob_subforest_predict(forest, data, 1) == int(np.argmax(forest.trees[0].counts[
            forest.trees[0].apply(x)[0]]))

    def test_inbag_everywhere_has_no_subforest(self, oob_fixture):
        data, forest = oob_fixture
        inbag = forest.inbag.copy()
        inbag[:, 0] = True
        f2 = RandomForest(forest.trees, inbag, 2, 1)
        assert oob_subforest_predict(f2, data, 0) is None
        assert oob_predictions(f2, data)[0] == -1
        # excluded from numerator and denominator
        assert oob_accuracy(f2, data) == 1.0

    def test_all_correct(self):
        data = Dataset([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], 2)
        forest = RandomForest([stump(1.5, [3, 0], [0, 3])] * 2,
                              np.array([[True, False, True, False], [False, True, False, True]]),
                              2, 1)
        assert oob_accuracy(forest, data) == 1.0

    def test_undefined_when_no_subforests(self, oob_fixture):
        data, forest = oob_fixture
        f2 = RandomForest(forest.trees, np.ones_like(forest.inbag), 2, 1)
        with pytest.raises(UndefinedAccuracyError):
            oob_accuracy(f2, data)

    def test_subset_rules(self, oob_fixture):
        data, forest = oob_fixture
        assert oob_accuracy_subset(forest, data, range(4)) == oob_accuracy(forest, data)
        assert oob_accuracy_subset(forest, data, [1]) == 1.0
        assert oob_accuracy_subset(forest, data, [0]) == 0.0
        with pytest.raises(InvalidInputError):
            oob_accuracy_subset(forest, data, [])
        with pytest.raises(InvalidInputError):
            oob_accuracy_subset(forest, data, [4])

    def test_subset_all_excluded_falls_back(self, oob_fixture):
        data, forest = oob_fixture
        inbag = forest.inbag.copy()
        inbag[:, 0] = True
        f2 = RandomForest(forest.trees, inbag, 2, 1)
        assert oob_accuracy_subset(f2, data, [0]) == oob_accuracy(f2, data)

    def test_random_subsets_of_fixture(self, oob_fixture):
        data, forest = oob_fixture
        rng = np.random.default_rng(0)
        for _ in range(30):
            sub = rng.choice(4, size=rng.integers(1, 5), replace=False)
            assert oob_accuracy_subset(forest, data, sub) == oracles.oob_accuracy(
                forest, data.features, data.labels, sub)

    def test_noise_labels_near_majority_prior(self):
        accs = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(300, 5))
            y = (rng.random(300) < 0.3).astype(int)
            data = Dataset(X, y, 2)
            acc = oob_accuracy(train_forest(data, ForestConfig(n_trees=100, seed=seed)), data)
            prior = max(y.mean(), 1 - y.mean())
            assert abs(acc - prior) <= 0.1
            accs.append(acc)

    def test_wrong_training_set_rejected(self, oob_fixture):
        _, forest = oob_fixture
        with pytest.raises(InvalidInputError):
            oob_accuracy(forest, Dataset([[0.0], [1.0]], [0, 1], 2))


class TestDataset:
    def test_rejects_bad_input(self):
        with pytest.raises(InvalidInputError):
            Dataset([[1.0]], [0], 2)
        with pytest.raises(InvalidInputError):
            Dataset([[1.0], [np.nan]], [0, 1], 2)
        with pytest.raises(InvalidInputError):
            Dataset([[1.0], [2.0]], [0, 2], 2)
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((2, 0)), [0, 1], 2)
