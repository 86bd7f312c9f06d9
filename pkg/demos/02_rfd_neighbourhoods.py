"""Random forest dissimilarity and the neighbourhoods it induces.

Two samples are close when most trees route them to the same leaf.  The
distance only depends on the forest, so it adapts to whichever features
the trees found useful.
"""
import numpy as np

from dynvote.dissimilarity import neighborhood, rfd, rfd_to_training
from dynvote.forest import Dataset, ForestConfig, train_forest

rng = np.random.default_rng(4)
n = 150
y = rng.integers(0, 2, size=n)
signal = rng.normal(size=n) + 3.0 * y
nuisance = rng.normal(scale=10.0, size=(n, 2))
X = np.column_stack([signal, nuisance])
data = Dataset(X, y, 2)
forest = train_forest(data, ForestConfig(n_trees=200, seed=0))

# %%
# Euclidean distance is dominated by the large nuisance columns; RFD is not.
a, b = X[y == 0][0], X[y == 1][0]
print("Euclidean a-b:", round(float(np.linalg.norm(a - b)), 2))
print("RFD       a-b:", rfd(forest, a, b))
print("RFD       a-a:", rfd(forest, a, a))

# %%
# The 7 nearest training samples of a query under RFD mostly share its class.
query = np.array([3.2, 0.0, 0.0])
nb = neighborhood(forest, data, query, 7)
print("neighbour indices:", nb.indices.tolist())
print("their distances:  ", np.round(nb.distances, 3).tolist())
print("their labels:     ", y[nb.indices].tolist())

# %%
d = rfd_to_training(forest, data, query)
print("distance histogram over the training set:")
counts, edges = np.histogram(d, bins=5, range=(0, 1))
for c, lo, hi in zip(counts, edges, edges[1:]):
    print(f"  [{lo:.1f}, {hi:.1f}) {'#' * int(c // 2)} {c}")
