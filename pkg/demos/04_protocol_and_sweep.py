"""Repeated hold-out comparison, ranks, sign tests and the GLnew sweep.

This is the library route to what ``dynvote evaluate`` and ``dynvote
sweep-a`` do from the shell.
"""
import numpy as np

from dynvote.data_io import SynthSpec, generate_synthetic
from dynvote.evaluation import SplitPlan, run_protocol
from dynvote.forest import ForestConfig
from dynvote.multiview import MultiViewDataset
from dynvote.voting import glnew

plan = SplitPlan(repeats=5, train_fraction=0.5, seed=7)
config = ForestConfig(n_trees=200)

# %%
# Three synthetic datasets that differ in how much the views disagree.
report = None
for k, noise in enumerate([0.5, 1.0, 1.5]):
    data = generate_synthetic(SynthSpec(n_samples=200, noise=noise, seed=k))
    data = MultiViewDataset(data.views, data.labels, 2, data.view_names, data.class_names,
                            f"noise{noise:g}")
    rep = run_protocol(data, ["MV", "WRF", "GDV", "LDV", "GLDV"], plan, config)
    report = rep if report is None else report.merge(rep)

print(report.to_markdown(reference="MV"))

# %%
# GLnew(a) moves from the global weight (a=0) to the local one (a=1).
data = generate_synthetic(SynthSpec(n_samples=200, seed=0))
grid = [glnew(a) for a in np.linspace(0, 1, 6)]
sweep = run_protocol(data, grid, plan, config)
for c in grid:
    print(f"{c.name:12s} {100 * sweep.mean('synthetic', c.name):6.2f}%")
