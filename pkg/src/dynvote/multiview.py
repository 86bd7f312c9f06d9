"""Multi-view data and the per-view forest ensemble."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionMismatchError, InvalidInputError
from .forest import (
    Dataset,
    ForestConfig,
    RandomForest,
    _accuracy_from_correctness,
    derive_seed,
    oob_correctness,
    train_forest,
)

__all__ = ["MultiViewDataset", "ViewEnsemble", "train_multiview", "predict"]


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    """Aligned feature matrices for the same samples, one per view.

    Parameters
    ----------
    views : sequence of ndarray, each (n_samples, d_q)
    labels : ndarray of shape (n_samples,)
        Contiguous class ids.
    n_classes : int
    view_names : sequence of str, optional
    class_names : sequence of str, optional
        Original label value for every class id.
    name : str
    """

    views: Sequence[np.ndarray]
    labels: np.ndarray
    n_classes: int
    view_names: Optional[Sequence[str]] = None
    class_names: Optional[Sequence[str]] = None
    name: str = "dataset"
    _datasets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.views) < 1:
            raise InvalidInputError("a multi-view dataset needs at least one view")
        datasets = tuple(Dataset(v, self.labels, self.n_classes) for v in self.views)
        n = datasets[0].n_samples
        for q, ds in enumerate(datasets):
            if ds.n_samples != n:
                raise InvalidInputError(
                    f"view {q} has {ds.n_samples} samples, expected {n}")
        names = self.view_names
        if names is None:
            names = [f"view{q}" for q in range(len(datasets))]
        if len(names) != len(datasets):
            raise InvalidInputError(
                f"{len(names)} view names for {len(datasets)} views")
        classes = self.class_names
        if classes is None:
            classes = [str(c) for c in range(self.n_classes)]
        if len(classes) != self.n_classes:
            raise InvalidInputError(
                f"{len(classes)} class names for {self.n_classes} classes")
        object.__setattr__(self, "_datasets", datasets)
        object.__setattr__(self, "views", tuple(ds.features for ds in datasets))
        object.__setattr__(self, "labels", datasets[0].labels)
        object.__setattr__(self, "view_names", tuple(str(s) for s in names))
        object.__setattr__(self, "class_names", tuple(str(s) for s in classes))

    @property
    def n_views(self) -> int:
        return len(self._datasets)

    @property
    def n_samples(self) -> int:
        return self._datasets[0].n_samples

    @property
    def view_dims(self) -> tuple:
        return tuple(ds.n_features for ds in self._datasets)

    def view(self, q: int) -> Dataset:
        return self._datasets[q]

    def subset(self, indices) -> "MultiViewDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return MultiViewDataset(
            [v[indices] for v in self.views], self.labels[indices], self.n_classes,
            self.view_names, self.class_names, self.name)


class ViewEnsemble:
    """One random forest per view, with the training data it was grown on.

    The training data is kept because neighbourhood search and local OOB
    accuracy both need it.  Leaf ids of the training samples and their OOB
    outcomes are computed once at construction.

    Attributes
    ----------
    static_weights : ndarray of shape (n_views,)
        OOB accuracy of every view's forest.
    """

    def __init__(self, data: MultiViewDataset, forests: Sequence[RandomForest],
                 config: ForestConfig):
        if len(forests) != data.n_views:
            raise InvalidInputError(
                f"{len(forests)} forests for {data.n_views} views")
        self.data = data
        self.forests = tuple(forests)
        self.config = config
        self.metadata = {}
        self.train_leaves = tuple(
            f.apply(data.views[q]) for q, f in enumerate(self.forests))
        self.oob_correct = tuple(
            oob_correctness(f, data.view(q)) for q, f in enumerate(self.forests))
        self.static_weights = np.array(
            [_accuracy_from_correctness(c) for c in self.oob_correct])

    @property
    def n_views(self) -> int:
        return self.data.n_views

    @property
    def n_classes(self) -> int:
        return self.data.n_classes

    def check_views(self, X_views, batch: bool = True) -> list:
        """Validate per-view inputs; returns a list of 2-D float arrays."""
        if len(X_views) != self.n_views:
            raise DimensionMismatchError(
                f"expected {self.n_views} views, got {len(X_views)}")
        out = []
        for q, X in enumerate(X_views):
            X = np.asarray(X, dtype=np.float64)
            if not batch:
                X = X[None, :] if X.ndim == 1 else X
            d = self.data.view_dims[q]
            if X.ndim != 2 or X.shape[1] != d:
                raise DimensionMismatchError(
                    f"view {q} ({self.data.view_names[q]!r}) expects {d} features, "
                    f"got shape {np.shape(X_views[q])}")
            out.append(np.ascontiguousarray(X))
        n = {X.shape[0] for X in out}
        if len(n) != 1:
            raise DimensionMismatchError(f"views disagree on sample count: {sorted(n)}")
        return out


def train_multiview(data: MultiViewDataset, config: ForestConfig,
                    n_jobs: int = 1) -> ViewEnsemble:
    """Train one forest per view.

    View ``q`` uses the seed ``derive_seed(config.seed, q)`` so identical views
    still get distinct forests.
    """
    forests = []
    for q in range(data.n_views):
        cfg = replace(config, seed=derive_seed(config.seed, q))
        forests.append(train_forest(data.view(q), cfg, n_jobs=n_jobs))
    return ViewEnsemble(data, forests, config)


def predict(ensemble: ViewEnsemble, x_views, combiner, n_neighbor: int = 7):
    """Vote on one multi-view sample; see :func:`dynvote.voting.dynamic_vote`."""
    from .voting import dynamic_vote

    return dynamic_vote(ensemble, x_views, combiner, n_neighbor=n_neighbor)
