import numpy as np
import pytest

from dynvote.forest import Dataset, DecisionTree, ForestConfig, RandomForest, train_forest


def make_tree(feature, threshold, left, right, counts, n_features=1):
    feature = np.asarray(feature, dtype=np.int64)
    leaf_index = np.full(feature.shape, -1, dtype=np.int64)
    leaf_index[feature < 0] = np.arange((feature < 0).sum())
    return DecisionTree(feature, np.asarray(threshold, dtype=np.float64),
                        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                        np.asarray(counts, dtype=np.int64), leaf_index, n_features)


def stump(threshold, left_counts, right_counts, feature=0, n_features=1):
    n = len(left_counts)
    return make_tree([feature, -1, -1], [threshold, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                     [[a + b for a, b in zip(left_counts, right_counts)], left_counts,
                      right_counts], n_features)


def leaf(counts, n_features=1):
    return make_tree([-1], [0.0], [-1], [-1], [counts], n_features)


@pytest.fixture
def oob_fixture():
    """Four samples, three hand-built trees; exactly 3 of 4 OOB votes are right.

    sample 0: OOB only in the root-leaf tree, which says class 1 (wrong)
    sample 1: OOB only in the perfect stump (right)
    sample 2: OOB in the lopsided stump and the root leaf, both say 1 (right)
    sample 3: OOB only in the perfect stump (right)
    """
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    trees = [stump(1.5, [3, 0], [0, 3]), stump(0.5, [2, 0], [1, 2]), leaf([1, 2])]
    inbag = np.array([[True, False, True, False],
                      [True, True, False, True],
                      [False, True, False, True]])
    return Dataset(X, y, 2), RandomForest(trees, inbag, 2, 1)


@pytest.fixture(scope="session")
def small_forest():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 4))
    y = (X[:, 0] + 0.7 * rng.normal(size=60) > 0).astype(int)
    data = Dataset(X, y, 2)
    return data, train_forest(data, ForestConfig(n_trees=25, seed=3))
