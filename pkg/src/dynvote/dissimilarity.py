"""Random-forest dissimilarity and RFD neighbourhoods.

The dissimilarity between two samples is the fraction of trees in which they
land in different leaves.  Values are computed as integer disagreement counts
and divided by the number of trees only at the end, so ``rfd * n_trees`` is an
integer and ranking ties are exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError
from .forest import Dataset, RandomForest, _as_matrix, _as_vector

__all__ = [
    "Neighborhood",
    "rfd",
    "rfd_to_training",
    "rfd_counts",
    "neighborhood",
    "neighborhoods",
]


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Training indices closest to a query, nearest first."""

    indices: np.ndarray
    distances: np.ndarray
    view: Optional[int] = None

    def __len__(self):
        return len(self.indices)


def rfd(forest: RandomForest, x_a, x_b) -> float:
    """Fraction of trees routing ``x_a`` and ``x_b`` to different leaves."""
    x_a = _as_vector(x_a, forest.n_features)
    x_b = _as_vector(x_b, forest.n_features)
    leaves = forest.apply(np.stack([x_a, x_b]))
    return int((leaves[:, 0] != leaves[:, 1]).sum()) / forest.n_trees


def rfd_counts(train_leaves: np.ndarray, query_leaves: np.ndarray) -> np.ndarray:
    """Number of disagreeing trees between queries and training samples.

    Parameters
    ----------
    train_leaves : ndarray of shape (n_trees, n_train)
    query_leaves : ndarray of shape (n_trees, n_queries)

    Returns
    -------
    ndarray of shape (n_queries, n_train), integer counts
    """
    n_q = query_leaves.shape[1]
    out = np.empty((n_q, train_leaves.shape[1]), dtype=np.int64)
    for j in range(n_q):
        out[j] = (train_leaves != query_leaves[:, j : j + 1]).sum(axis=0)
    return out


def rfd_to_training(forest: RandomForest, train: Dataset, x,
                    train_leaves: Optional[np.ndarray] = None) -> np.ndarray:
    """RFD between ``x`` and every training sample.

    ``train_leaves`` may carry a precomputed ``forest.apply(train.features)``.
    """
    x = _as_vector(x, forest.n_features)
    if train_leaves is None:
        train_leaves = forest.apply(train.features)
    counts = rfd_counts(train_leaves, forest.apply(x[None, :]))[0]
    return counts / forest.n_trees


def _nearest(counts: np.ndarray, n_neighbor: int) -> np.ndarray:
    # stable sort keeps smaller training index first among equal distances
    return np.argsort(counts, kind="stable")[:n_neighbor]


def neighborhood(forest: RandomForest, train: Dataset, x, n_neighbor: int,
                 train_leaves: Optional[np.ndarray] = None,
                 view: Optional[int] = None) -> Neighborhood:
    """The ``n_neighbor`` training samples with the smallest RFD to ``x``.

    Ties are broken by the smaller training index.  ``n_neighbor`` is clamped
    to the training set size.
    """
    if n_neighbor < 1:
        raise InvalidInputError(f"n_neighbor must be >= 1, got {n_neighbor}")
    x = _as_vector(x, forest.n_features)
    if train_leaves is None:
        train_leaves = forest.apply(train.features)
    counts = rfd_counts(train_leaves, forest.apply(x[None, :]))[0]
    idx = _nearest(counts, n_neighbor)
    return Neighborhood(idx, counts[idx] / forest.n_trees, view)


def neighborhoods(forest: RandomForest, train_leaves: np.ndarray, X,
                  n_neighbor: int) -> np.ndarray:
    """Batched :func:`neighborhood`: index matrix of shape (n_queries, k)."""
    if n_neighbor < 1:
        raise InvalidInputError(f"n_neighbor must be >= 1, got {n_neighbor}")
    X = _as_matrix(X, forest.n_features)
    counts = rfd_counts(train_leaves, forest.apply(X))
    k = min(n_neighbor, train_leaves.shape[1])
    return np.argsort(counts, axis=1, kind="stable")[:, :k]
