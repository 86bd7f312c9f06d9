"""Weighted voting over per-view forest predictions.

Each view casts its predicted label with a weight and the class with the
largest summed weight wins (ties to the smallest class id).  The combiners
differ only in where the weight comes from:

========  ==========================================================
MV        1 for every view
WRF       OOB accuracy of the view's forest, fixed at training time
GDV       forest posterior of the predicted class at the test sample
LDV       OOB accuracy of the forest over the test sample's RFD
          neighbourhood in the training set
GLDV      GDV weight times LDV weight
GLnew(a)  GDV ** (1 - a) * LDV ** a
========  ==========================================================
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dissimilarity import neighborhood, neighborhoods
from .exceptions import InvalidInputError
from .forest import Dataset, RandomForest, _subset_accuracy, oob_correctness
from .multiview import ViewEnsemble

__all__ = [
    "Combiner",
    "MV",
    "WRF",
    "GDV",
    "LDV",
    "GLDV",
    "glnew",
    "WeightVector",
    "VoteRecord",
    "ViewScores",
    "combine_vote",
    "combine_votes",
    "static_weights",
    "global_weight",
    "local_weight",
    "gl_weight",
    "glnew_weight",
    "score_views",
    "combiner_weights",
    "dynamic_vote",
    "vote_batch",
]

_KINDS = ("MV", "WRF", "GDV", "LDV", "GLDV", "GLNEW")
_ALIASES = {"MVRF": "MV"}
_GLNEW_RE = re.compile(r"^GLNEW\s*[(:=]?\s*([0-9.eE+-]+)\s*\)?$")


@dataclass(frozen=True)
class Combiner:
    """A voting scheme; ``a`` is only used by ``GLNEW``."""

    kind: str
    a: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown combiner {self.kind!r}")
        if self.kind == "GLNEW":
            if self.a is None or not 0.0 <= self.a <= 1.0:
                raise InvalidInputError(f"GLnew exponent must lie in [0, 1], got {self.a}")
            object.__setattr__(self, "a", float(self.a))
        elif self.a is not None:
            raise InvalidInputError(f"{self.kind} takes no exponent")

    @property
    def name(self) -> str:
        if self.kind == "GLNEW":
            return f"GLnew({self.a:g})"
        return self.kind

    @property
    def needs_local(self) -> bool:
        return self.kind in ("LDV", "GLDV", "GLNEW")

    @classmethod
    def parse(cls, text: str) -> "Combiner":
        """Parse ``MV``, ``MVRF``, ``WRF``, ``GDV``, ``LDV``, ``GLDV`` or ``GLnew(a)``."""
        key = text.strip().upper()
        key = _ALIASES.get(key, key)
        if key in _KINDS and key != "GLNEW":
            return cls(key)
        m = _GLNEW_RE.match(key)
        if m is None:
            raise InvalidInputError(f"cannot parse combiner {text!r}")
        return cls("GLNEW", float(m.group(1)))

    def __str__(self):
        return self.name


MV = Combiner("MV")
WRF = Combiner("WRF")
GDV = Combiner("GDV")
LDV = Combiner("LDV")
GLDV = Combiner("GLDV")


def glnew(a: float) -> Combiner:
    return Combiner("GLNEW", a)


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    combiner: Combiner


@dataclass(frozen=True, eq=False)
class VoteRecord:
    """Everything that went into one final decision.

    ``fallback`` is True when every view weight was zero and the vote was
    decided by plain majority instead.
    """

    labels: np.ndarray
    weights: WeightVector
    class_sums: np.ndarray
    label: int
    fallback: bool = False
    global_weights: Optional[np.ndarray] = None
    local_weights: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# combination rule
# ---------------------------------------------------------------------------

TIE_RTOL = 1e-12


def combine_votes(labels: np.ndarray, weights: np.ndarray, n_classes: int):
    """Weighted vote for a batch.

    Parameters
    ----------
    labels : int array of shape (n_views, n_samples)
    weights : float array of shape (n_views, n_samples), non-negative
    n_classes : int

    Returns
    -------
    final : ndarray of shape (n_samples,)
    class_sums : ndarray of shape (n_samples, n_classes)
    fallback : bool ndarray of shape (n_samples,)
        Samples whose weights were all zero and were decided by majority.

    Notes
    -----
    Sums within a relative ``TIE_RTOL`` of the largest are treated as tied, so
    ties that hold exactly in rational arithmetic (3/7 + 4/7 against 1) still
    go to the smallest class whatever the rounding or the weight scale.
    """
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if labels.shape != weights.shape or labels.ndim != 2:
        raise InvalidInputError(
            f"labels {labels.shape} and weights {weights.shape} must match and be 2-D")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InvalidInputError("weights must be finite and non-negative")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidInputError(f"labels must lie in [0, {n_classes})")
    fallback = ~np.any(weights > 0, axis=0)
    if fallback.any():
        weights = weights.copy()
        weights[:, fallback] = 1.0
    n = labels.shape[1]
    cols = np.arange(n)
    sums = np.zeros((n, n_classes))
    for q in range(labels.shape[0]):
        sums[cols, labels[q]] += weights[q]
    top = sums.max(axis=1, keepdims=True)
    final = np.argmax(sums >= top * (1.0 - TIE_RTOL), axis=1)
    return final, sums, fallback


def combine_vote(labels, weights, n_classes: int, combiner: Combiner = MV) -> VoteRecord:
    """Weighted vote for one sample.

    Class ``j`` collects the weights of every view that predicted ``j``; the
    largest sum wins and ties go to the smallest class id.

    >>> r = combine_vote([0, 1, 0, 1, 1], [1, 1, 1, 1, 1], 2)
    >>> r.label, r.class_sums.tolist()
    (1, [2.0, 3.0])
    """
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if labels.ndim != 1 or labels.shape != weights.shape:
        raise InvalidInputError("labels and weights must be 1-D of equal length")
    final, sums, fb = combine_votes(labels[:, None], weights[:, None], n_classes)
    return VoteRecord(labels, WeightVector(weights, combiner), sums[0],
                      int(final[0]), bool(fb[0]))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def static_weights(ensemble: ViewEnsemble) -> WeightVector:
    """Per-view OOB accuracies, shared by every test sample."""
    return WeightVector(ensemble.static_weights.copy(), WRF)


def global_weight(forest: RandomForest, x):
    """Predicted label of ``x`` and its posterior probability."""
    from .forest import predict_proba

    proba = predict_proba(forest, x)
    label = int(np.argmax(proba))
    return label, float(proba[label])


def local_weight(forest: RandomForest, train: Dataset, x, n_neighbor: int = 7) -> float:
    """OOB accuracy of ``forest`` over the RFD neighbourhood of ``x``."""
    nb = neighborhood(forest, train, x, n_neighbor)
    return _subset_accuracy(oob_correctness(forest, train), nb.indices)


def _check_unit(name, v):
    if not 0.0 <= v <= 1.0:
        raise InvalidInputError(f"{name} weight must lie in [0, 1], got {v}")


def gl_weight(global_w: float, local_w: float) -> float:
    """Product of the global and local weights."""
    _check_unit("global", global_w)
    _check_unit("local", local_w)
    return float(global_w) * float(local_w)


def _glnew(g, l, a: float):
    if a == 0.0:
        return g
    if a == 1.0:
        return l
    return np.power(g, 1.0 - a) * np.power(l, a)


def glnew_weight(global_w: float, local_w: float, a: float) -> float:
    """Log-linear blend ``global ** (1 - a) * local ** a`` with ``0 ** 0 = 1``."""
    if not 0.0 <= a <= 1.0:
        raise InvalidInputError(f"a must lie in [0, 1], got {a}")
    _check_unit("global", global_w)
    _check_unit("local", local_w)
    return float(_glnew(np.float64(global_w), np.float64(local_w), float(a)))


# ---------------------------------------------------------------------------
# ensemble scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ViewScores:
    """Per-view labels and weights for a batch, each of shape (n_views, n_samples)."""

    labels: np.ndarray
    global_weights: np.ndarray
    local_weights: Optional[np.ndarray]
    static_weights: np.ndarray


def score_views(ensemble: ViewEnsemble, X_views, n_neighbor: int = 7,
                need_local: bool = True) -> ViewScores:
    """Per-view predictions, global weights and (optionally) local weights.

    The neighbourhood of a sample is searched separately in every view with
    that view's forest.
    """
    X_views = ensemble.check_views(X_views)
    Q = ensemble.n_views
    T = X_views[0].shape[0]
    labels = np.empty((Q, T), dtype=np.int64)
    glob = np.empty((Q, T))
    local = np.empty((Q, T)) if need_local else None
    for q, (forest, X) in enumerate(zip(ensemble.forests, X_views)):
        proba = forest.predict_proba(X)
        labels[q] = np.argmax(proba, axis=1)
        glob[q] = proba[np.arange(T), labels[q]]
        if need_local:
            nb = neighborhoods(forest, ensemble.train_leaves[q], X, n_neighbor)
            correct = ensemble.oob_correct[q][nb]
            n_valid = (correct >= 0).sum(axis=1)
            n_right = (correct == 1).sum(axis=1)
            w = np.full(T, ensemble.static_weights[q])
            has = n_valid > 0
            w[has] = n_right[has] / n_valid[has]
            local[q] = w
    return ViewScores(labels, glob, local, ensemble.static_weights.copy())


def combiner_weights(combiner: Combiner, scores: ViewScores) -> np.ndarray:
    """Weight matrix of shape (n_views, n_samples) for ``combiner``."""
    shape = scores.labels.shape
    kind = combiner.kind
    if kind == "MV":
        return np.ones(shape)
    if kind == "WRF":
        return np.repeat(scores.static_weights[:, None], shape[1], axis=1)
    if kind == "GDV":
        return scores.global_weights.copy()
    if scores.local_weights is None:
        raise InvalidInputError(f"{combiner.name} needs local weights")
    if kind == "LDV":
        return scores.local_weights.copy()
    if kind == "GLDV":
        return scores.global_weights * scores.local_weights
    return _glnew(scores.global_weights, scores.local_weights, combiner.a).copy()


def _as_combiner(c) -> Combiner:
    return c if isinstance(c, Combiner) else Combiner.parse(str(c))


def vote_batch(ensemble: ViewEnsemble, X_views, combiners: Sequence,
               n_neighbor: int = 7, scores: Optional[ViewScores] = None) -> dict:
    """Final labels for a batch under several combiners sharing one scoring pass.

    Returns a dict mapping combiner name to ``(final, weights, fallback)``.
    """
    combiners = [_as_combiner(c) for c in combiners]
    if scores is None:
        scores = score_views(ensemble, X_views, n_neighbor,
                             need_local=any(c.needs_local for c in combiners))
    out = {}
    for c in combiners:
        w = combiner_weights(c, scores)
        final, _, fb = combine_votes(scores.labels, w, ensemble.n_classes)
        out[c.name] = (final, w, fb)
    return out


def dynamic_vote(ensemble: ViewEnsemble, x_views, combiner,
                 n_neighbor: int = 7) -> VoteRecord:
    """Vote on one multi-view sample under ``combiner``.

    ``x_views`` holds one feature vector per view.  The returned record carries
    the per-view labels, the weights, the per-class sums and the global and
    local weights they were derived from.
    """
    combiner = _as_combiner(combiner)
    X_views = ensemble.check_views(x_views, batch=False)
    if X_views[0].shape[0] != 1:
        raise InvalidInputError("dynamic_vote scores one sample; use vote_batch")
    scores = score_views(ensemble, X_views, n_neighbor, need_local=combiner.needs_local)
    w = combiner_weights(combiner, scores)
    final, sums, fb = combine_votes(scores.labels, w, ensemble.n_classes)
    local = None if scores.local_weights is None else scores.local_weights[:, 0]
    return VoteRecord(scores.labels[:, 0], WeightVector(w[:, 0], combiner), sums[0],
                      int(final[0]), bool(fb[0]), scores.global_weights[:, 0], local)
