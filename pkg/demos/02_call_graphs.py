# %% [markdown]
# # Call graphs
#
# One month of calls becomes a weighted graph. The weight scheme, edge
# direction, exponential decay and time-of-week segment are all choices.

# %%
import numpy as np

from churnnet import SynthConfig, generate, paper_segmentations, sparsity
from churnnet.graph import DEFAULT_DECAY, filter_reciprocal
from churnnet.pipeline import GraphSpec, Timeline

store, _ = generate(SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=11))
tl = Timeline(store)

# %%
for direction in ("undirected", "outgoing", "incoming"):
    for scheme in ("binary", "count", "length", "average"):
        g = tl.graph(GraphSpec(direction, scheme, None), (4, 4))
        w = g.weights.data
        print(f"{direction:10s} {scheme:7s} edges {g.n_edges:6d}  weight range [{w.min():.3g}, {w.max():.3g}]")

# %% [markdown]
# Decay discounts older weeks, so recent calls weigh more. With the default
# rate a call from four weeks back counts about 70% of one from this week.

# %%
print("default decay rate per week:", DEFAULT_DECAY, "->", np.exp(-DEFAULT_DECAY * 4))
flat = tl.graph(GraphSpec(decay=None), (2, 4)).weights
decayed = tl.graph(GraphSpec(), (2, 4)).weights
print("total weight, three months:", flat.sum(), "->", decayed.sum())

# %% [markdown]
# Segments keep only calls in a time-of-week slice. Combinations mix two
# slices with fractional weights. Reciprocal graphs keep mutual ties only.

# %%
for seg in paper_segmentations()[:12]:
    g = tl.graph(GraphSpec(segment=seg.name), (4, 4))
    print(f"{seg.name:18s} edges {g.n_edges:6d}  sparsity {sparsity(g):.2e}")
g = tl.graph(GraphSpec("outgoing", "count", None), (4, 4))
print("outgoing edges", g.n_edges, "| reciprocal only", filter_reciprocal(g).n_edges)
