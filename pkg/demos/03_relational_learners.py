# %% [markdown]
# # Relational learners
#
# A learner pairs a relational classifier (WVRN, CDRN, NLB, SPA-RC) with a
# collective-inference scheme (none, Gibbs, IC, RL, RLSA, SPA). Scoring M5
# uses the M4 graph with M4 labels as known state; CDRN and NLB learn their
# parameters on M3 against M4.

# %%
import numpy as np

from churnnet import ALL_LEARNERS, CiConfig, SynthConfig, auc, frame, generate, sensitivity_trace
from churnnet.pipeline import GraphSpec, Timeline
from churnnet.relational import WVRN

store, _ = generate(SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=11))
tl = Timeline(store)
fr = frame("short")

# %%
results = {}
for learner in ALL_LEARNERS:
    s = tl.score(learner, GraphSpec(), fr, CiConfig(burn_in=50))
    results[learner] = auc(*tl.evaluation(s, fr.target_month))
for learner, v in sorted(results.items(), key=lambda kv: -kv[1]):
    print(f"{learner:12s} AUC {v:.3f}")

# %% [markdown]
# Collective inference smooths the scores: the variance of the score
# changes falls fast with the number of sweeps.

# %%
g = tl.graph(GraphSpec(), (4, 4))
state = tl.state(4)
rc = WVRN(g, float(state.labels.mean()))
for method in ("rl", "rlsa", "spa", "gibbs"):
    tr = sensitivity_trace(rc, CiConfig(method, burn_in=5), g, state, 10)
    print(f"{method:6s}", np.array2string(tr / tr[0], precision=3))
