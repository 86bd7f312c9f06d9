"""Repeated stratified hold-out evaluation, ranking and the sign test."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .exceptions import InvalidInputError
from .forest import ForestConfig, derive_seed
from .multiview import MultiViewDataset, train_multiview
from .voting import Combiner, _as_combiner, vote_batch

__all__ = [
    "SplitPlan",
    "EvalReport",
    "SignTestResult",
    "stratified_split",
    "run_protocol",
    "average_rank",
    "sign_test",
    "win_tie_loss",
]

SIGN_TEST_ALPHAS = (0.10, 0.05)


@dataclass(frozen=True)
class SplitPlan:
    repeats: int = 10
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise InvalidInputError(f"repeats must be >= 1, got {self.repeats}")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError(
                f"train fraction must lie in (0, 1), got {self.train_fraction}")


def stratified_split(labels, fraction: float, rng: np.random.Generator):
    """Split indices into train/test keeping class proportions.

    Class ``c`` with ``n_c`` members contributes ``round(fraction * n_c)``
    samples to the training part (round half to even), clamped to
    ``[1, n_c - 1]``.

    Returns
    -------
    train, test : sorted index arrays
    """
    labels = np.asarray(labels)
    if not 0.0 < fraction < 1.0:
        raise InvalidInputError(f"fraction must lie in (0, 1), got {fraction}")
    train = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n_c = members.size
        if n_c < 2:
            raise InvalidInputError(f"class {c!r} has {n_c} member(s); need at least 2")
        k = min(max(round(fraction * n_c), 1), n_c - 1)
        train.append(rng.permutation(members)[:k])
    train = np.sort(np.concatenate(train))
    mask = np.ones(labels.shape[0], dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


@dataclass
class EvalReport:
    """Per-repeat accuracies for every (dataset, method) pair.

    ``accuracies[dataset][method]`` is an array of one accuracy per repeat.
    Standard deviations are population standard deviations.
    """

    accuracies: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    settings: Dict[str, object] = field(default_factory=dict)

    @property
    def datasets(self) -> List[str]:
        return list(self.accuracies)

    @property
    def methods(self) -> List[str]:
        seen = []
        for per in self.accuracies.values():
            for m in per:
                if m not in seen:
                    seen.append(m)
        return seen

    def mean(self, dataset: str, method: str) -> float:
        return float(np.mean(self.accuracies[dataset][method]))

    def std(self, dataset: str, method: str) -> float:
        return float(np.std(self.accuracies[dataset][method]))

    def mean_table(self, methods: Optional[Sequence[str]] = None) -> np.ndarray:
        """Mean accuracies, shape (n_datasets, n_methods)."""
        methods = self.methods if methods is None else list(methods)
        return np.array([[self.mean(d, m) for m in methods] for d in self.datasets])

    def merge(self, other: "EvalReport") -> "EvalReport":
        acc = {d: dict(v) for d, v in self.accuracies.items()}
        for d, per in other.accuracies.items():
            acc.setdefault(d, {}).update(per)
        return EvalReport(acc, {**self.settings, **other.settings})

    def average_ranks(self, methods: Optional[Sequence[str]] = None) -> np.ndarray:
        return average_rank(self.mean_table(methods))

    def sign_tests(self, reference: str, methods: Optional[Sequence[str]] = None) -> list:
        """Sign test of every method against ``reference`` over the datasets."""
        methods = [m for m in (self.methods if methods is None else methods) if m != reference]
        out = []
        for m in methods:
            a = np.array([self.mean(d, m) for d in self.datasets])
            b = np.array([self.mean(d, reference) for d in self.datasets])
            w, t, l = win_tie_loss(a, b)
            out.append((m, w, t, l, [sign_test(w, t, l, alpha) for alpha in SIGN_TEST_ALPHAS]))
        return out

    # -- serialisation ----------------------------------------------------

    def to_csv(self) -> str:
        """One row per dataset x method x repeat."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "method", "repeat", "accuracy"])
        for d, per in self.accuracies.items():
            for m, accs in per.items():
                for r, a in enumerate(accs):
                    w.writerow([d, m, r, repr(float(a))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        acc: Dict[str, Dict[str, dict]] = {}
        reader = csv.DictReader(io.StringIO(text))
        missing = {"dataset", "method", "repeat", "accuracy"} - set(reader.fieldnames or ())
        if missing:
            raise InvalidInputError(f"results CSV lacks columns {sorted(missing)}")
        for row in reader:
            acc.setdefault(row["dataset"], {}).setdefault(row["method"], {})[
                int(row["repeat"])] = float(row["accuracy"])
        return cls({d: {m: np.array([v[r] for r in sorted(v)]) for m, v in per.items()}
                    for d, per in acc.items()})

    def to_markdown(self, methods: Optional[Sequence[str]] = None,
                    reference: Optional[str] = None) -> str:
        """Summary table (mean% ± std per cell, average-rank row) plus sign tests."""
        methods = self.methods if methods is None else list(methods)
        lines = []
        if self.settings:
            lines.append("<!-- " + " ".join(f"{k}={v}" for k, v in self.settings.items()) + " -->")
            lines.append("")
        lines.append("| Dataset | " + " | ".join(methods) + " |")
        lines.append("|---|" + "---|" * len(methods))
        for d in self.datasets:
            cells = [f"{100 * self.mean(d, m):.2f}% ± {100 * self.std(d, m):.2f}"
                     if m in self.accuracies[d] else "n/a" for m in methods]
            lines.append(f"| {d} | " + " | ".join(cells) + " |")
        if all(m in per for per in self.accuracies.values() for m in methods):
            ranks = self.average_ranks(methods)
            lines.append("| Average Rank | " + " | ".join(f"{r:.3f}" for r in ranks) + " |")
        lines.append("")
        lines.append("std: population standard deviation over repeats, in percentage points")
        if reference is not None and reference in methods:
            lines.append("")
            lines.append(format_sign_tests(self.sign_tests(reference, methods), reference,
                                           len(self.datasets)))
        return "\n".join(lines) + "\n"


def format_sign_tests(results, reference: str, n_datasets: int) -> str:
    lines = [f"Sign test against {reference} over {n_datasets} dataset(s)", ""]
    head = "| Method | wins | ties | losses | " + " | ".join(
        f"n_c (alpha={a:.2f}) | significant (alpha={a:.2f})" for a in SIGN_TEST_ALPHAS) + " |"
    lines.append(head)
    lines.append("|---|---|---|---|" + "---|---|" * len(SIGN_TEST_ALPHAS))
    for m, w, t, l, tests in results:
        cells = " | ".join(f"{r.critical_value:.3f} | {'yes' if r.significant else 'no'}"
                           for r in tests)
        lines.append(f"| {m} | {w} | {t} | {l} | {cells} |")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# protocol
# ---------------------------------------------------------------------------

def run_protocol(data: MultiViewDataset, methods: Sequence, plan: SplitPlan,
                 config: ForestConfig, n_neighbor: int = 7, n_jobs: int = 1) -> EvalReport:
    """Repeated stratified hold-out evaluation of several combiners.

    Every repeat draws one split, trains one ensemble on the training part and
    scores all methods on the test part with that same ensemble.
    """
    combiners: List[Combiner] = [_as_combiner(m) for m in methods]
    names = [c.name for c in combiners]
    if len(set(names)) != len(names):
        raise InvalidInputError(f"duplicate methods in {names}")
    acc = {n: np.empty(plan.repeats) for n in names}
    for r in range(plan.repeats):
        rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(r, 0)))
        train, test = stratified_split(data.labels, plan.train_fraction, rng)
        cfg = replace(config, seed=derive_seed(plan.seed, r, 1))
        ens = train_multiview(data.subset(train), cfg, n_jobs=n_jobs)
        X_test = [v[test] for v in data.views]
        y_test = data.labels[test]
        for name, (final, _, _) in vote_batch(ens, X_test, combiners, n_neighbor).items():
            acc[name][r] = np.mean(final == y_test)
    settings = {
        "seed": plan.seed,
        "repeats": plan.repeats,
        "fraction": plan.train_fraction,
        "trees": config.n_trees,
        "neighbors": n_neighbor,
        "std": "population",
    }
    return EvalReport({data.name: acc}, settings)


# ---------------------------------------------------------------------------
# ranking and significance
# ---------------------------------------------------------------------------

def average_rank(table) -> np.ndarray:
    """Mean rank of every method (column) over datasets (rows).

    Higher accuracy gets the better (smaller) rank; ties share the average of
    the ranks they span.
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.size == 0:
        raise InvalidInputError("table must be a non-empty 2-D array")
    ranks = np.vstack([rankdata(-row, method="average") for row in table])
    return ranks.mean(axis=0)


def win_tie_loss(a, b):
    """Counts of datasets where ``a`` beats, ties with and loses to ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return int((a > b).sum()), int((a == b).sum()), int((a < b).sum())


@dataclass(frozen=True)
class SignTestResult:
    n: int
    effective_wins: float
    alpha: float
    critical_value: float
    significant: bool


def _z_one_sided(alpha: float) -> float:
    # tabulated to three decimals: 1.282 at 0.10, 1.645 at 0.05
    return round(NormalDist().inv_cdf(1.0 - alpha), 3)


def sign_test(wins: int, ties: int, losses: int, alpha: float = 0.05) -> SignTestResult:
    """Sign test on win/tie/loss counts over datasets.

    Ties count as half a win.  The method is significantly better when its
    effective wins reach ``n / 2 + z_alpha * sqrt(n) / 2``.

    >>> sign_test(4, 0, 0, 0.05).significant
    True
    >>> sign_test(3, 0, 1, 0.05).significant
    False
    """
    if min(wins, ties, losses) < 0:
        raise InvalidInputError("counts must be non-negative")
    n = wins + ties + losses
    if n == 0:
        raise InvalidInputError("sign test needs at least one comparison")
    if not 0.0 < alpha < 0.5:
        raise InvalidInputError(f"alpha must lie in (0, 0.5), got {alpha}")
    crit = n / 2.0 + _z_one_sided(alpha) * math.sqrt(n) / 2.0
    eff = wins + ties / 2.0
    return SignTestResult(n, eff, alpha, crit, eff >= crit)
