"""Random forests grown from scratch with an explicit out-of-bag ledger.

Trees are CART classifiers (Gini criterion, midpoint thresholds, left branch
when ``x[feature] <= threshold``) grown on bootstrap samples with random
feature selection at every node.  The forest records which training samples
entered each tree's bootstrap so that out-of-bag (OOB) sub-forest predictions
can be computed for any training sample.

Tie-breaking is deterministic everywhere: equal-score splits resolve to the
smallest feature index and then the smallest threshold, and every argmax over
classes resolves to the smallest class id.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .exceptions import (
    DimensionMismatchError,
    InvalidInputError,
    UndefinedAccuracyError,
)

__all__ = [
    "Dataset",
    "ForestConfig",
    "DecisionTree",
    "RandomForest",
    "derive_seed",
    "draw_bootstrap",
    "train_tree",
    "train_forest",
    "predict_proba",
    "predict_label",
    "leaf_id",
    "oob_predictions",
    "oob_subforest_predict",
    "oob_accuracy",
    "oob_accuracy_subset",
]

# Minimum gain in the Gini proxy for a split to count as an improvement.
SPLIT_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Dataset:
    """Single-view labelled data.

    Parameters
    ----------
    features : ndarray of shape (n_samples, n_features)
    labels : ndarray of shape (n_samples,)
        Integer class ids in ``0 .. n_classes - 1``.
    n_classes : int
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise InvalidInputError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError(
                f"labels shape {y.shape} does not match {X.shape[0]} samples")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise InvalidInputError(
                f"need at least 2 samples and 1 feature, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("features contain missing or non-finite values")
        if self.n_classes < 1 or y.min() < 0 or y.max() >= self.n_classes:
            raise InvalidInputError(
                f"labels must lie in [0, {self.n_classes}), "
                f"got range [{y.min()}, {y.max()}]")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "n_classes", int(self.n_classes))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyper-parameters.

    ``max_features=None`` means ``max(1, floor(sqrt(d)))`` at training time and
    ``max_depth=None`` grows trees until the stopping rules fire.
    """

    n_trees: int = 500
    max_features: Optional[int] = None
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidInputError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_features is not None and self.max_features < 1:
            raise InvalidInputError(
                f"max_features must be >= 1, got {self.max_features}")
        if self.min_samples_split < 2:
            raise InvalidInputError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidInputError(f"max_depth must be >= 0, got {self.max_depth}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned int, got {self.seed}")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return max(1, math.isqrt(n_features))
        if self.max_features > n_features:
            raise InvalidInputError(
                f"max_features={self.max_features} exceeds {n_features} features")
        return self.max_features


def derive_seed(master: int, *key: int) -> int:
    """Deterministic 64-bit child seed for ``(master, *key)``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_bootstrap(master: int, tree_index: int, n_samples: int):
    """Bootstrap indices and tree seed for tree ``tree_index`` of a forest.

    Returns
    -------
    bootstrap : ndarray of shape (n_samples,)
        Indices drawn with replacement.
    tree_seed : int
        Seed for the tree's own feature-sampling stream.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=(int(tree_index),)))
    bootstrap = rng.integers(0, n_samples, size=n_samples, dtype=np.int64)
    tree_seed = int(rng.integers(0, 2**63, dtype=np.int64))
    return bootstrap, tree_seed


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """A fitted tree stored as flat node arrays.

    Node 0 is the root and nodes are numbered in pre-order.  For a leaf,
    ``feature == -1`` and ``leaf_index`` holds its 0-based position among the
    tree's leaves (also pre-order).  ``counts[node]`` is the class histogram of
    the bootstrap draws that reached the node, duplicates included.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    leaf_index: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    def apply(self, X) -> np.ndarray:
        """Node id reached by every row of ``X``."""
        X = _as_matrix(X, self.n_features)
        return _route(self.feature, self.threshold, self.left, self.right, X)

    def leaf_ids(self, X) -> np.ndarray:
        return self.leaf_index[self.apply(X)]

    def node_proba(self) -> np.ndarray:
        """Per-node class fractions, shape (n_nodes, n_classes)."""
        c = self.counts.astype(np.float64)
        return c / c.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class RandomForest:
    """Trees plus the bootstrap membership of every training sample.

    ``inbag[k, i]`` is True when training sample ``i`` was drawn at least once
    into tree ``k``'s bootstrap.
    """

    trees: Sequence[DecisionTree]
    inbag: np.ndarray
    n_classes: int
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) != self.inbag.shape[0]:
            raise InvalidInputError(
                f"{len(self.trees)} trees but {self.inbag.shape[0]} inbag rows")
        object.__setattr__(self, "_proba", tuple(t.node_proba() for t in self.trees))

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_train(self) -> int:
        return self.inbag.shape[1]

    def apply(self, X) -> np.ndarray:
        """Leaf ids, shape (n_trees, n_samples)."""
        X = _as_matrix(X, self.n_features)
        out = np.empty((self.n_trees, X.shape[0]), dtype=np.int64)
        for k, t in enumerate(self.trees):
            out[k] = t.leaf_index[_route(t.feature, t.threshold, t.left, t.right, X)]
        return out

    def predict_proba(self, X) -> np.ndarray:
        """Mean of per-tree leaf class fractions, shape (n_samples, n_classes)."""
        X = _as_matrix(X, self.n_features)
        acc = np.zeros((X.shape[0], self.n_classes))
        for t, proba in zip(self.trees, self._proba):
            acc += proba[_route(t.feature, t.threshold, t.left, t.right, X)]
        return acc / self.n_trees

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def _as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"expected {n_features} features, got shape {X.shape}")
    return np.ascontiguousarray(X)


def _as_vector(x, n_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n_features,):
        raise DimensionMismatchError(
            f"expected a vector of {n_features} features, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _route(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@numba.njit(cache=True, nogil=True)
def _grow(X, y, bootstrap, n_classes, max_features, min_samples_split,
          max_depth, rng):
    n_boot = bootstrap.shape[0]
    d = X.shape[1]
    cap = 2 * n_boot - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    leaf_index = np.full(cap, -1, dtype=np.int64)

    idx = bootstrap.copy()
    perm = np.empty(d, dtype=np.int64)
    vals = np.empty(n_boot, dtype=np.float64)
    cls = np.empty(n_boot, dtype=np.int64)
    cl = np.empty(n_classes, dtype=np.float64)
    cr = np.empty(n_classes, dtype=np.float64)

    # stack rows: parent, side (0 root, 1 left, 2 right), start, end, depth
    stack = np.empty((cap, 5), dtype=np.int64)
    stack[0, 0] = -1
    stack[0, 1] = 0
    stack[0, 2] = 0
    stack[0, 3] = n_boot
    stack[0, 4] = 0
    top = 1
    n_nodes = 0
    n_leaves = 0

    while top > 0:
        top -= 1
        parent = stack[top, 0]
        side = stack[top, 1]
        start = stack[top, 2]
        end = stack[top, 3]
        depth = stack[top, 4]
        node = n_nodes
        n_nodes += 1
        if side == 1:
            left[parent] = node
        elif side == 2:
            right[parent] = node

        n = end - start
        for i in range(start, end):
            counts[node, y[idx[i]]] += 1
        sq = 0.0
        n_nonzero = 0
        for c in range(n_classes):
            v = counts[node, c]
            sq += v * v
            if v > 0:
                n_nonzero += 1
        parent_proxy = sq / n

        best_f = -1
        best_t = 0.0
        best_proxy = -np.inf
        can_split = (n_nonzero > 1 and n >= min_samples_split
                     and (max_depth < 0 or depth < max_depth))
        if can_split:
            for j in range(d):
                perm[j] = j
            for j in range(max_features):
                r = j + rng.integers(0, d - j)
                tmp = perm[j]
                perm[j] = perm[r]
                perm[r] = tmp
            cand = np.sort(perm[:max_features])

            for f in cand:
                for i in range(n):
                    vals[i] = X[idx[start + i], f]
                order = np.argsort(vals[:n])
                for i in range(n):
                    cls[i] = y[idx[start + order[i]]]
                for c in range(n_classes):
                    cl[c] = 0.0
                    cr[c] = counts[node, c]
                sql = 0.0
                sqr = sq
                for i in range(n - 1):
                    c = cls[i]
                    sql += 2.0 * cl[c] + 1.0
                    sqr -= 2.0 * cr[c] - 1.0
                    cl[c] += 1.0
                    cr[c] -= 1.0
                    lo = vals[order[i]]
                    hi = vals[order[i + 1]]
                    if lo < hi:
                        nl = i + 1.0
                        proxy = sql / nl + sqr / (n - nl)
                        if proxy > best_proxy + SPLIT_EPS:
                            best_proxy = proxy
                            best_f = f
                            t = (lo + hi) / 2.0
                            if t >= hi:
                                t = lo
                            best_t = t

        if best_f < 0 or best_proxy <= parent_proxy + SPLIT_EPS:
            leaf_index[node] = n_leaves
            n_leaves += 1
            continue

        feature[node] = best_f
        threshold[node] = best_t
        i = start
        j = end - 1
        while i <= j:
            if X[idx[i], best_f] <= best_t:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        # right pushed first so the left child is numbered next (pre-order)
        stack[top, 0] = node
        stack[top, 1] = 2
        stack[top, 2] = i
        stack[top, 3] = end
        stack[top, 4] = depth + 1
        top += 1
        stack[top, 0] = node
        stack[top, 1] = 1
        stack[top, 2] = start
        stack[top, 3] = i
        stack[top, 4] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            counts[:n_nodes].copy(), leaf_index[:n_nodes].copy())


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def train_tree(data: Dataset, bootstrap, config: ForestConfig, tree_seed: int) -> DecisionTree:
    """Grow one CART tree on the bootstrap multiset ``bootstrap``.

    At every node ``max_features`` candidate features are drawn without
    replacement and the (feature, threshold) pair minimising the weighted Gini
    impurity of the children is chosen.  A node becomes a leaf when it is pure,
    has fewer than ``min_samples_split`` draws, has reached ``max_depth``, or
    no candidate split lowers the impurity.
    """
    bootstrap = np.ascontiguousarray(bootstrap, dtype=np.int64)
    if bootstrap.ndim != 1 or bootstrap.size == 0:
        raise InvalidInputError("bootstrap must be a non-empty 1-D index array")
    if bootstrap.min() < 0 or bootstrap.max() >= data.n_samples:
        raise InvalidInputError("bootstrap indices out of range")
    k = config.resolve_max_features(data.n_features)
    rng = np.random.default_rng(int(tree_seed))
    depth = -1 if config.max_depth is None else int(config.max_depth)
    arrays = _grow(data.features, data.labels, bootstrap, data.n_classes, k,
                   config.min_samples_split, depth, rng)
    return DecisionTree(*arrays, n_features=data.n_features)


def _train_one(data: Dataset, config: ForestConfig, k: int):
    bootstrap, tree_seed = draw_bootstrap(config.seed, k, data.n_samples)
    tree = train_tree(data, bootstrap, config, tree_seed)
    inbag = np.zeros(data.n_samples, dtype=bool)
    inbag[bootstrap] = True
    return tree, inbag


def train_forest(data: Dataset, config: ForestConfig, n_jobs: int = 1) -> RandomForest:
    """Train ``config.n_trees`` trees on bootstrap samples of ``data``.

    Each tree draws its bootstrap and feature-sampling stream from a seed
    derived from ``(config.seed, tree index)``, so the result does not depend
    on ``n_jobs``.
    """
    config.resolve_max_features(data.n_features)
    if n_jobs is None or n_jobs <= 1:
        results = [_train_one(data, config, k) for k in range(config.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda k: _train_one(data, config, k),
                                    range(config.n_trees)))
    trees = [r[0] for r in results]
    inbag = np.stack([r[1] for r in results])
    return RandomForest(trees, inbag, data.n_classes, data.n_features, config)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def predict_proba(forest: RandomForest, x) -> np.ndarray:
    """Class probabilities for the single feature vector ``x``."""
    x = _as_vector(x, forest.n_features)
    return forest.predict_proba(x[None, :])[0]


def predict_label(forest: RandomForest, x) -> int:
    """Most probable class for ``x``; ties go to the smallest class id."""
    return int(np.argmax(predict_proba(forest, x)))


def leaf_id(tree: DecisionTree, x) -> int:
    x = _as_vector(x, tree.n_features)
    return int(tree.leaf_ids(x[None, :])[0])


# ---------------------------------------------------------------------------
# out-of-bag machinery
# ---------------------------------------------------------------------------

def oob_predictions(forest: RandomForest, data: Dataset) -> np.ndarray:
    """Sub-forest prediction for every training sample.

    The sub-forest of sample ``i`` holds the trees whose bootstrap did not
    contain ``i``.  Entries are ``-1`` for samples that are in-bag everywhere.
    """
    if data.n_samples != forest.n_train:
        raise InvalidInputError(
            f"forest was trained on {forest.n_train} samples, got {data.n_samples}")
    X = _as_matrix(data.features, forest.n_features)
    votes = np.zeros((X.shape[0], forest.n_classes))
    for t, proba, inbag in zip(forest.trees, forest._proba, forest.inbag):
        oob = ~inbag
        nodes = _route(t.feature, t.threshold, t.left, t.right, X[oob])
        votes[oob] += proba[nodes]
    n_oob = (~forest.inbag).sum(axis=0)
    pred = np.full(X.shape[0], -1, dtype=np.int64)
    has = n_oob > 0
    pred[has] = np.argmax(votes[has] / n_oob[has, None], axis=1)
    return pred


def oob_subforest_predict(forest: RandomForest, data: Dataset, i: int) -> Optional[int]:
    """Sub-forest prediction for training sample ``i``, or None if it has none."""
    if not 0 <= i < forest.n_train:
        raise InvalidInputError(f"training index {i} out of range")
    oob = np.flatnonzero(~forest.inbag[:, i])
    if oob.size == 0:
        return None
    x = data.features[i : i + 1]
    votes = np.zeros(forest.n_classes)
    for k in oob:
        t = forest.trees[k]
        votes += forest._proba[k][_route(t.feature, t.threshold, t.left, t.right, x)[0]]
    return int(np.argmax(votes / oob.size))


def oob_correctness(forest: RandomForest, data: Dataset) -> np.ndarray:
    """Per-sample OOB outcome: 1 correct, 0 wrong, -1 no sub-forest."""
    pred = oob_predictions(forest, data)
    out = (pred == data.labels).astype(np.int8)
    out[pred < 0] = -1
    return out


def _accuracy_from_correctness(correct: np.ndarray) -> float:
    valid = correct >= 0
    if not valid.any():
        raise UndefinedAccuracyError("no sample has an out-of-bag sub-forest")
    return float(correct[valid].sum() / valid.sum())


def _subset_accuracy(correct: np.ndarray, subset) -> float:
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise InvalidInputError("subset must be non-empty")
    if subset.min() < 0 or subset.max() >= correct.shape[0]:
        raise InvalidInputError("subset indices out of range")
    local = correct[subset]
    valid = local >= 0
    if not valid.any():
        return _accuracy_from_correctness(correct)
    return float(local[valid].sum() / valid.sum())


def oob_accuracy(forest: RandomForest, data: Dataset) -> float:
    """Fraction of samples whose sub-forest predicts their label.

    Samples without a sub-forest are left out of both numerator and
    denominator.
    """
    return _accuracy_from_correctness(oob_correctness(forest, data))


def oob_accuracy_subset(forest: RandomForest, data: Dataset, subset) -> float:
    """OOB accuracy restricted to ``subset``.

    Falls back to :func:`oob_accuracy` when no member of ``subset`` has a
    sub-forest.
    """
    return _subset_accuracy(oob_correctness(forest, data), subset)
