"""Slow, independent reference computations used by the tests.

Nothing here calls into the package's routing, probability or OOB code; the
oracles read the raw node arrays of a tree and redo everything in plain
Python.
"""
import numpy as np

SPLIT_EPS = 1e-9


def leaf_rank(tree, node):
    """Pre-order position of ``node`` among the tree's leaves."""
    return sum(1 for j in range(node) if int(tree.feature[j]) == -1)


def traverse(tree, x):
    """Node id reached by ``x``, walking the arrays one node at a time."""
    node = 0
    while True:
        f = int(tree.feature[node])
        if f == -1:
            return node
        if float(x[f]) <= float(tree.threshold[node]):
            node = int(tree.left[node])
        else:
            node = int(tree.right[node])


def tree_leaf(tree, x):
    return leaf_rank(tree, traverse(tree, x))


def tree_fractions(tree, x):
    counts = [int(c) for c in tree.counts[traverse(tree, x)]]
    total = sum(counts)
    return [c / total for c in counts]


def argmax_first(values):
    best = 0
    for j, v in enumerate(values):
        if v > values[best]:
            best = j
    return best


def forest_proba(forest, x):
    acc = [0.0] * forest.n_classes
    for t in forest.trees:
        for j, p in enumerate(tree_fractions(t, x)):
            acc[j] += p
    return [a / forest.n_trees for a in acc]


def oob_prediction(forest, X, i):
    """Sub-forest vote for training sample ``i`` or None."""
    acc = [0.0] * forest.n_classes
    n = 0
    for k, t in enumerate(forest.trees):
        if bool(forest.inbag[k][i]):
            continue
        n += 1
        for j, p in enumerate(tree_fractions(t, X[i])):
            acc[j] += p
    if n == 0:
        return None
    return argmax_first([a / n for a in acc])


def oob_accuracy(forest, X, y, subset=None):
    """Brute-force OOB accuracy, with the documented whole-forest fallback."""
    def over(indices):
        right = total = 0
        for i in indices:
            p = oob_prediction(forest, X, i)
            if p is None:
                continue
            total += 1
            right += int(p == int(y[i]))
        return right, total

    if subset is None:
        right, total = over(range(len(y)))
        if total == 0:
            raise ZeroDivisionError
        return right / total
    right, total = over(subset)
    if total == 0:
        return oob_accuracy(forest, X, y)
    return right / total


def rfd(forest, a, b):
    diff = sum(1 for t in forest.trees if traverse(t, a) != traverse(t, b))
    return diff / forest.n_trees


def cart_leaves(X, y, samples, n_classes, min_samples_split=2):
    """Leaf histograms (pre-order) of an exhaustive-search Gini CART tree.

    Every feature is a candidate; equal-score splits resolve to the smallest
    feature and then the smallest threshold.
    """
    def hist(s):
        h = [0] * n_classes
        for i in s:
            h[int(y[i])] += 1
        return h

    def proxy(h):
        n = sum(h)
        return sum(c * c for c in h) / n

    leaves = []

    def grow(s):
        h = hist(s)
        n = len(s)
        if sum(1 for c in h if c) <= 1 or n < min_samples_split:
            leaves.append(h)
            return
        parent = sum(c * c for c in h) / n
        best, best_split = -np.inf, None
        for f in range(X.shape[1]):
            values = sorted({float(X[i, f]) for i in s})
            for lo, hi in zip(values, values[1:]):
                left = [i for i in s if float(X[i, f]) <= lo]
                right = [i for i in s if float(X[i, f]) > lo]
                hl, hr = hist(left), hist(right)
                p = (sum(c * c for c in hl) / len(left)
                     + sum(c * c for c in hr) / len(right))
                if p > best + SPLIT_EPS:
                    t = (lo + hi) / 2.0
                    if t >= hi:
                        t = lo
                    best, best_split = p, (f, t)
        if best_split is None or best <= parent + SPLIT_EPS:
            leaves.append(h)
            return
        f, t = best_split
        grow([i for i in s if float(X[i, f]) <= t])
        grow([i for i in s if float(X[i, f]) > t])

    grow(list(samples))
    return leaves
