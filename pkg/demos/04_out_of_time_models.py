# %% [markdown]
# # Out-of-time logistic models
#
# Features from M1-M3 are fitted against M4 churn. The model is then applied
# to features from M2-M4 and judged on M5. Three feature sets are compared:
# network and RFM features, relational-learner scores, and both.

# %%
from churnnet import SynthConfig, auc, generate, lift
from churnnet.classify import OotWindows, run_oot
from churnnet.pipeline import Timeline

store, _ = generate(SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=11))
tl = Timeline(store)
learners = ("no-wvrn", "no-nlb", "rl-cdrn", "spa-sparc")

# %%
for mode in ("network_only", "rl_only", "all"):
    res = run_oot(tl, mode, learners if mode != "network_only" else (), OotWindows(), ratio=0.5, seed=1)
    s, y = res.test.scores, res.test_labels
    print(f"{mode:13s} {len(res.columns):2d} features  AUC {auc(s, y):.3f}  lift@5% {lift(s, y, 0.05):.2f}")

# %% [markdown]
# Coefficients per standard deviation of each feature show what drives the
# model. Columns that did not vary in training (a collective-inference score
# that converged to one value, say) are dropped before fitting.

# %%
res = run_oot(tl, "all", learners)
m = res.model
print("dropped:", m.dropped)
for name, c in sorted(zip(m.used, m.coef), key=lambda kv: -abs(kv[1]))[:8]:
    print(f"{name:22s} {c:+.3f}")
