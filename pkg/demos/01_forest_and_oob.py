"""Grow a single random forest and look at its out-of-bag estimate.

Run with ``python demos/01_forest_and_oob.py``.
"""
import numpy as np

from dynvote.forest import (
    Dataset,
    ForestConfig,
    oob_accuracy,
    oob_predictions,
    predict_label,
    train_forest,
)

# %%
# Two noisy Gaussian blobs in four dimensions; only the first axis matters.
rng = np.random.default_rng(0)
y = rng.integers(0, 2, size=200)
X = rng.normal(size=(200, 4))
X[:, 0] += 2.0 * y
data = Dataset(X, y, n_classes=2)

forest = train_forest(data, ForestConfig(n_trees=300, seed=1))
print("trees:", forest.n_trees, "features per split:", forest.config.resolve_max_features(4))

# %%
# Each tree sees a bootstrap sample.  The rows it never saw are its
# out-of-bag (OOB) set, roughly 37% of the data.
oob_fraction = 1.0 - forest.inbag.mean(axis=1)
print(f"OOB fraction per tree: mean {oob_fraction.mean():.3f}, "
      f"range {oob_fraction.min():.3f}-{oob_fraction.max():.3f}")

# %%
# Voting every sample with only the trees that did not train on it gives a
# held-out accuracy estimate for free.
pred = oob_predictions(forest, data)
print("OOB accuracy:", round(oob_accuracy(forest, data), 4))
print("first ten OOB predictions:", pred[:10].tolist())
print("first ten labels:         ", y[:10].tolist())

# %%
# Predictions for new points average the leaf class fractions of all trees.
for x0 in (-1.0, 1.0, 3.0):
    print(f"x0={x0:+.1f} ->", predict_label(forest, [x0, 0.0, 0.0, 0.0]))
